"""Binary RBM parameterization, conditionals, block Gibbs transitions,
and an exact enumeration oracle for small models.

Conventions used throughout:

* binary states are float64 vectors with entries exactly 0.0 or 1.0,
* the joint energy is ``-(b.x + c.h + x.W.h)``,
* a Gibbs step samples the hidden layer first, then the visible layer,
  consuming exactly ``n_h + n_v`` uniforms index-ascending, so chains are
  bit-reproducible given a generator.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DimensionMismatchError, EnumerationLimitError

# Exact enumeration walks 2^min(n_v, n_h) states; 2^20 is the largest
# state count that still runs at desk scale.
ENUMERATION_LIMIT = 20

_CHUNK = 1 << 14


@dataclass(frozen=True)
class RbmParams:
    """Model parameters: weights ``W`` (n_v x n_h), visible bias ``b``,
    hidden bias ``c``. Arrays are copied and frozen on construction."""

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        c = np.array(self.c, dtype=np.float64)
        if W.ndim != 2 or b.ndim != 1 or c.ndim != 1:
            raise DimensionMismatchError(
                f"expected W 2-d, b/c 1-d; got {W.ndim}-d, {b.ndim}-d, {c.ndim}-d"
            )
        if W.shape != (b.size, c.size):
            raise DimensionMismatchError(
                f"W has shape {W.shape}, expected ({b.size}, {c.size})"
            )
        for name, a in (("W", W), ("b", b), ("c", c)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite entries in {name}")
        for a in (W, b, c):
            a.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n_v(self) -> int:
        return self.b.size

    @property
    def n_h(self) -> int:
        return self.c.size

    @classmethod
    def zeros(cls, n_v: int, n_h: int) -> "RbmParams":
        return cls(np.zeros((n_v, n_h)), np.zeros(n_v), np.zeros(n_h))


def as_binary(v, n: int, name: str = "state") -> np.ndarray:
    """Validate and return a length-``n`` float64 vector of exact 0/1 entries."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (n,):
        raise DimensionMismatchError(f"{name} has shape {a.shape}, expected ({n},)")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError(f"{name} entries must be exactly 0 or 1")
    return a


def softplus(z: np.ndarray) -> np.ndarray:
    # max(z, 0) + log1p(exp(-|z|)): exact for saturated arguments, no overflow
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def energy(x, h, p: RbmParams) -> float:
    """Joint energy -(b.x + c.h + x.W.h) of a binary state pair."""
    x = as_binary(x, p.n_v, "visible state")
    h = as_binary(h, p.n_h, "hidden state")
    return float(-(p.b @ x + p.c @ h + x @ p.W @ h))


def hidden_conditional(x, p: RbmParams) -> np.ndarray:
    """P(h_j = 1 | x) = sigmoid(c_j + sum_i W_ij x_i), for all j."""
    x = as_binary(x, p.n_v, "visible state")
    return expit(p.c + p.W.T @ x)


def visible_conditional(h, p: RbmParams) -> np.ndarray:
    """P(x_i = 1 | h) = sigmoid(b_i + sum_j W_ij h_j), for all i."""
    h = as_binary(h, p.n_h, "hidden state")
    return expit(p.b + p.W @ h)


def _gibbs_kernel(x: np.ndarray, p: RbmParams, rng: np.random.Generator) -> np.ndarray:
    h = (rng.random(p.n_h) < expit(p.c + p.W.T @ x)).astype(np.float64)
    return (rng.random(p.n_v) < expit(p.b + p.W @ h)).astype(np.float64)


def gibbs_step(x, p: RbmParams, rng: np.random.Generator) -> np.ndarray:
    """One hidden-then-visible block Gibbs sweep from visible state ``x``.

    Consumes exactly ``n_h + n_v`` uniforms: hidden units index-ascending,
    then visible units index-ascending.  ``u < prob`` maps to an active unit.
    """
    return _gibbs_kernel(as_binary(x, p.n_v, "visible state"), p, rng)


def gibbs_chain(x, k: int, p: RbmParams, rng: np.random.Generator) -> np.ndarray:
    """``k`` consecutive Gibbs sweeps; validates the start state once."""
    x = as_binary(x, p.n_v, "visible state")
    for _ in range(k):
        x = _gibbs_kernel(x, p, rng)
    return x


def free_energy(x, p: RbmParams) -> float:
    """log sum_h exp(-E(x, h)) = b.x + sum_j softplus(c_j + W_j.x)."""
    x = as_binary(x, p.n_v, "visible state")
    return float(p.b @ x + softplus(p.c + p.W.T @ x).sum())


def _state_chunks(n: int):
    """Yield all 2^n binary row vectors as float64 chunks, ascending as
    n-bit integers with index 0 as the least significant bit."""
    total = 1 << n
    bits = np.arange(n, dtype=np.uint64)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        yield ((codes[:, None] >> bits) & 1).astype(np.float64)


def _check_enumerable(p: RbmParams, limit: int) -> bool:
    """True when the visible side is the enumeration side; raises when
    neither side fits within ``limit``."""
    if min(p.n_v, p.n_h) > limit:
        raise EnumerationLimitError(
            f"model {p.n_v}x{p.n_h} exceeds the enumeration limit "
            f"({limit}) on both sides"
        )
    return p.n_v <= p.n_h


def _visible_free_energies(states: np.ndarray, p: RbmParams) -> np.ndarray:
    return states @ p.b + softplus(p.c + states @ p.W).sum(axis=1)


def _hidden_free_energies(states: np.ndarray, p: RbmParams) -> np.ndarray:
    return states @ p.c + softplus(p.b + states @ p.W.T).sum(axis=1)


def exact_log_partition(p: RbmParams, limit: int = ENUMERATION_LIMIT) -> float:
    """log Z by enumerating the smaller layer (visible on ties)."""
    if _check_enumerable(p, limit):
        parts = [logsumexp(_visible_free_energies(s, p)) for s in _state_chunks(p.n_v)]
    else:
        parts = [logsumexp(_hidden_free_energies(s, p)) for s in _state_chunks(p.n_h)]
    return float(logsumexp(parts))


def exact_model_expectation(p: RbmParams, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """E_{p(x,h)}[x h^T] as an n_v x n_h matrix, by exact enumeration.

    Over the visible side this is sum_x P(x) x hidden_conditional(x)^T;
    the hidden-side form is symmetric and equals the same expectation.
    """
    log_z = exact_log_partition(p, limit)
    out = np.zeros((p.n_v, p.n_h))
    if _check_enumerable(p, limit):
        for states in _state_chunks(p.n_v):
            probs = np.exp(_visible_free_energies(states, p) - log_z)
            out += (states * probs[:, None]).T @ expit(p.c + states @ p.W)
    else:
        for states in _state_chunks(p.n_h):
            probs = np.exp(_hidden_free_energies(states, p) - log_z)
            out += expit(p.b + states @ p.W.T).T @ (states * probs[:, None])
    return out


def exact_log_likelihood(x, p: RbmParams, limit: int = ENUMERATION_LIMIT) -> float:
    """log P(x) = free_energy(x) - log Z."""
    return free_energy(x, p) - exact_log_partition(p, limit)


def exact_visible_distribution(p: RbmParams, limit: int = ENUMERATION_LIMIT):
    """All 2^n_v visible states with their exact marginal probabilities.

    Requires the visible side itself to fit within ``limit``; used as a
    sampling oracle in tests and sanity checks.
    """
    if p.n_v > limit:
        raise EnumerationLimitError(
            f"visible side {p.n_v} exceeds the enumeration limit ({limit})"
        )
    states = np.concatenate(list(_state_chunks(p.n_v)), axis=0)
    log_z = exact_log_partition(p, limit)
    probs = np.exp(_visible_free_energies(states, p) - log_z)
    return states, probs
