"""Minibatch CD-1 training with checkpointing.

Training is plain stochastic gradient ascent on the per-example log
likelihood: no weight decay, no momentum.  Updates use all three gradient
blocks (weights and both biases).  Examples are re-binarized at every
presentation, so the data noise is part of the training signal.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import seeding
from .data import Dataset
from .errors import DataFormatError, NumericAbortError
from .model import RbmParams, softplus

CHECKPOINT_MAGIC = b"RBMCKPT1"

# candidate-rate ladder for the adaptive mode
_RATE_STEP = 1.1


class LrMode(str, enum.Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    minibatch_size: int = 100
    learning_rate: float = 0.01
    lr_mode: LrMode = LrMode.FIXED
    seed: int = 0
    checkpoint_epochs: tuple = ()
    n_hidden: int | None = None  # defaults to the data dimensionality

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        bad = [e for e in self.checkpoint_epochs if not 0 <= e <= self.epochs]
        if bad:
            raise ValueError(f"checkpoint epochs outside [0, {self.epochs}]: {bad}")
        object.__setattr__(self, "lr_mode", LrMode(self.lr_mode))
        object.__setattr__(self, "checkpoint_epochs",
                           tuple(sorted(set(int(e) for e in self.checkpoint_epochs))))


@dataclass(frozen=True)
class Checkpoint:
    params: RbmParams
    epoch: int
    train_seed: int


def init_params(n_v: int, n_h: int, seed: int) -> RbmParams:
    """Weights from N(0, 1/(n_v + n_h)); biases start at zero."""
    if n_v < 1 or n_h < 1:
        raise ValueError("layer sizes must be >= 1")
    rng = seeding.stream(seed, seeding.DOMAIN_INIT)
    std = 1.0 / np.sqrt(n_v + n_h)
    return RbmParams(rng.normal(0.0, std, size=(n_v, n_h)),
                     np.zeros(n_v), np.zeros(n_h))


def _batch_free_energy(X: np.ndarray, W, b, c) -> np.ndarray:
    return X @ b + softplus(c + X @ W).sum(axis=1)


def _batch_gradients(X: np.ndarray, W, b, c, rng: np.random.Generator):
    """Mean CD-1 gradient over a binarized minibatch.

    Hidden states are sampled binary inside the chain; the positive and
    negative statistics use conditional hidden probabilities.  Draw order:
    hidden samples, then visible samples, each row-major over the batch.
    """
    n = X.shape[0]
    hp_pos = expit(c + X @ W)
    h = (rng.random(hp_pos.shape) < hp_pos).astype(np.float64)
    vp = expit(b + h @ W.T)
    X_neg = (rng.random(vp.shape) < vp).astype(np.float64)
    hp_neg = expit(c + X_neg @ W)
    dW = (X.T @ hp_pos - X_neg.T @ hp_neg) / n
    db = (X - X_neg).mean(axis=0)
    dc = (hp_pos - hp_neg).mean(axis=0)
    return dW, db, dc, X_neg


def train(data: Dataset, cfg: TrainConfig, on_checkpoint=None) -> list:
    """Run minibatch CD-1 ascent and return checkpoints in epoch order.

    ``on_checkpoint`` is invoked as each checkpoint is produced, so callers
    can persist progress before a potential numeric abort.
    """
    if data.n_examples == 0:
        raise ValueError("dataset is empty")
    n_v = data.dim
    n_h = cfg.n_hidden if cfg.n_hidden is not None else n_v
    params = init_params(n_v, n_h, cfg.seed)
    W, b, c = params.W.copy(), params.b.copy(), params.c.copy()
    rate = cfg.learning_rate

    checkpoints = []

    def _emit(ckpt: Checkpoint) -> None:
        checkpoints.append(ckpt)
        if on_checkpoint is not None:
            on_checkpoint(ckpt)

    wanted = set(cfg.checkpoint_epochs)
    if 0 in wanted:
        _emit(Checkpoint(params=params, epoch=0, train_seed=cfg.seed))

    for epoch in range(1, cfg.epochs + 1):
        order = seeding.stream(cfg.seed, seeding.DOMAIN_SHUFFLE, epoch).permutation(
            data.n_examples
        )
        for batch_index, start in enumerate(
            range(0, data.n_examples, cfg.minibatch_size)
        ):
            rows = data.intensities[order[start:start + cfg.minibatch_size]]
            rng = seeding.stream(cfg.seed, seeding.DOMAIN_BATCH, epoch, batch_index)
            X = (rng.random(rows.shape) < rows).astype(np.float64)
            dW, db, dc, X_neg = _batch_gradients(X, W, b, c, rng)

            if cfg.lr_mode is LrMode.ADAPTIVE:
                rate = _pick_rate(X, X_neg, W, b, c, dW, db, dc, rate)
            W += rate * dW
            b += rate * db
            c += rate * dc
            if not (np.isfinite(W).all() and np.isfinite(b).all()
                    and np.isfinite(c).all()):
                raise NumericAbortError(
                    f"non-finite parameters at epoch {epoch}, minibatch "
                    f"{batch_index} (learning rate {rate} too high)"
                )
        if epoch in wanted:
            _emit(Checkpoint(params=RbmParams(W, b, c), epoch=epoch,
                             train_seed=cfg.seed))
    return checkpoints


def _pick_rate(X, X_neg, W, b, c, dW, db, dc, rate: float) -> float:
    """Score candidate rates {rate/1.1, rate, rate*1.1} by the free-energy
    gap between the minibatch and its negative particles after a trial
    update, and keep the best candidate.

    This is a deliberately simplified stand-in for a full adaptive-rate
    scheme; the fixed mode is what quantitative runs use.
    """
    best_rate, best_score = rate, -np.inf
    for candidate in (rate / _RATE_STEP, rate, rate * _RATE_STEP):
        W2 = W + candidate * dW
        b2 = b + candidate * db
        c2 = c + candidate * dc
        score = (_batch_free_energy(X, W2, b2, c2).mean()
                 - _batch_free_energy(X_neg, W2, b2, c2).mean())
        if np.isfinite(score) and score > best_score:
            best_rate, best_score = candidate, score
    return best_rate


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    """RBMCKPT1 container: magic, LE u32 n_v, u32 n_h, u64 epoch, u64 seed,
    then b, c, W (row-major) as little-endian float64."""
    p = checkpoint.params
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IIQQ", p.n_v, p.n_h, checkpoint.epoch,
                            checkpoint.train_seed))
        f.write(p.b.astype("<f8").tobytes())
        f.write(p.c.astype("<f8").tobytes())
        f.write(p.W.astype("<f8").tobytes(order="C"))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic {magic!r} at offset 0 "
                f"(expected {CHECKPOINT_MAGIC!r})"
            )
        header = f.read(24)
        if len(header) != 24:
            raise DataFormatError(f"{path}: truncated header at offset 8")
        n_v, n_h, epoch, seed = struct.unpack("<IIQQ", header)
        need = 8 * (n_v + n_h + n_v * n_h)
        raw = f.read(need)
        if len(raw) != need:
            raise DataFormatError(
                f"{path}: truncated parameter block at offset {32 + len(raw)}"
            )
    values = np.frombuffer(raw, dtype="<f8")
    b = values[:n_v]
    c = values[n_v:n_v + n_h]
    W = values[n_v + n_h:].reshape(n_v, n_h)
    return Checkpoint(params=RbmParams(W, b, c), epoch=epoch, train_seed=seed)
