"""Per-weight variance measurement of single-point gradient estimates.

The protocol never updates parameters.  For CD-k and I-CD-k, every working
example is estimated ``R`` times per k and ``R`` times with the long-chain
baseline; variances are taken per weight element over the repeats (unbiased,
divisor R-1), averaged over elements, then averaged over examples, and one
ratio against the baseline is reported per (init, epoch, k).  For PCD, the
measured object is the mean of k consecutive persistent-chain estimates
from a freshly burned-in chain, compared against means of k independent
baseline estimates.

Every estimate draw owns a distinct RNG stream keyed by
(seed, profile domain, strategy code, k, init seed, epoch, cell index
[, repeat]), so any single cell can be re-run in isolation and parallel
execution cannot change results.
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import seeding
from .data import Dataset, binarize
from .errors import DimensionMismatchError, ProtocolError
from .estimators import (
    Strategy,
    baseline_estimate,
    cd_k_estimate,
    icd_k_estimate,
    init_pcd_chain,
    pcd_estimate,
)
from .model import RbmParams
from .training import Checkpoint

# fixed work-partition sizes; results must not depend on the job count
_POINT_CHUNK = 25
_CHAIN_CHUNK = 50


@dataclass(frozen=True)
class ProtocolConfig:
    seed: int = 0
    n_inits: int = 10
    repeats_per_example: int = 10
    k_values: tuple = tuple(range(1, 11))
    k_baseline: int = 1000
    pcd_burn_in: int = 1000
    pcd_mean_lengths: tuple = tuple(range(1, 11))
    example_subset_size: int | None = None
    rebinarize: bool = True  # resample the positive binarization per draw

    def __post_init__(self):
        for name in ("n_inits", "repeats_per_example", "k_baseline"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.pcd_burn_in < 0:
            raise ValueError("pcd_burn_in must be >= 0")
        if not self.k_values:
            raise ValueError("k_values must be nonempty")
        for k in (*self.k_values, *self.pcd_mean_lengths):
            if k < 1:
                raise ValueError(f"chain lengths must be >= 1, got {k}")
        if self.example_subset_size is not None and self.example_subset_size < 1:
            raise ValueError("example_subset_size must be >= 1")
        object.__setattr__(self, "k_values",
                           tuple(sorted(set(int(k) for k in self.k_values))))
        object.__setattr__(self, "pcd_mean_lengths",
                           tuple(sorted(set(int(k) for k in self.pcd_mean_lengths))))


@dataclass(frozen=True)
class VarianceRow:
    dataset_id: str
    init_seed: int
    epoch: int
    strategy: str
    k: int
    mean_variance: float
    baseline_mean_variance: float
    ratio: float


@dataclass(frozen=True)
class AggregateCell:
    dataset_id: str
    strategy: str
    k: int
    epoch: int
    mean_ratio: float
    std_ratio: float
    n_inits: int
    single_init: bool


def per_element_variance(estimates) -> float:
    """Unbiased per-element variance of ``dW`` over the estimates (divisor
    R-1), averaged over all weight elements."""
    if len(estimates) < 2:
        raise ValueError("need at least 2 estimates for a variance")
    stack = np.stack([e.dW for e in estimates])
    if any(e.dW.shape != stack.shape[1:] for e in estimates):
        raise DimensionMismatchError("estimates have mismatched shapes")
    return float(stack.var(axis=0, ddof=1).mean())


def subset_indices(n_total: int, subset: int | None) -> np.ndarray:
    """Working-set indices: the whole set, or an evenly strided subset
    (preserves class balance of datasets ordered by class)."""
    if subset is None or subset >= n_total:
        return np.arange(n_total)
    return (np.arange(subset) * n_total) // subset


class _Moments:
    """Streaming per-element mean/variance (Welford update, Chan merge).

    Computes exactly the unbiased per-element variance that
    ``per_element_variance`` would produce, without materializing the stack.
    """

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, n: int, mean: np.ndarray, m2: np.ndarray) -> None:
        if n == 0:
            return
        total = self.n + n
        delta = mean - self.mean
        self.mean += delta * (n / total)
        self.m2 += m2 + delta * delta * (self.n * n / total)
        self.n = total

    def mean_element_variance(self) -> float:
        if self.n < 2:
            raise ValueError("need at least 2 samples for a variance")
        return float((self.m2 / (self.n - 1)).mean())


# ---------------------------------------------------------------------------
# worker context: filled once per profile call (inline, or per worker process)

_CTX = None


def _set_ctx(ctx) -> None:
    global _CTX
    _CTX = ctx


def _make_ctx(checkpoint: Checkpoint, data: Dataset, cfg: ProtocolConfig) -> dict:
    if checkpoint.params.n_v != data.dim:
        raise DimensionMismatchError(
            f"checkpoint has {checkpoint.params.n_v} visible units, "
            f"dataset rows have {data.dim}"
        )
    return {
        "params": checkpoint.params,
        "intensities": data.intensities,
        "cfg": cfg,
        "init_seed": checkpoint.train_seed,
        "epoch": checkpoint.epoch,
    }


def _run_chunks(ctx: dict, tasks: list, worker, jobs: int) -> list:
    """Run chunk tasks and return results in task order.  The task list,
    chunk contents and reduction order never depend on ``jobs``."""
    if jobs <= 1 or len(tasks) <= 1:
        _set_ctx(ctx)
        try:
            return [worker(t) for t in tasks]
        finally:
            _set_ctx(None)
    with ProcessPoolExecutor(max_workers=jobs, initializer=_set_ctx,
                             initargs=(ctx,)) as pool:
        return list(pool.map(worker, tasks))


def _positive_particle(row, code: int, e_abs: int, rng) -> np.ndarray:
    """Positive particle for one estimate draw.  In rebinarize mode the
    draw's own stream is used; otherwise a per-example stream fixes one
    binarization shared by all draws of that example."""
    ctx = _CTX
    if ctx["cfg"].rebinarize:
        return binarize(row, rng)
    fixed = seeding.stream(ctx["cfg"].seed, seeding.DOMAIN_PROFILE,
                           seeding.CODE_FIXED_BINARIZE, 0,
                           ctx["init_seed"], ctx["epoch"], e_abs, 0)
    return binarize(row, fixed)


def _point_chunk(task) -> np.ndarray:
    """Per-example mean-element variances for one (strategy, k) over a
    chunk of working-set examples."""
    code, k, indices = task
    ctx = _CTX
    p: RbmParams = ctx["params"]
    cfg: ProtocolConfig = ctx["cfg"]
    full = ctx["intensities"]
    out = np.empty(len(indices))
    for pos, e_abs in enumerate(indices):
        row = full[e_abs]
        estimates = []
        for rep in range(cfg.repeats_per_example):
            rng = seeding.stream(cfg.seed, seeding.DOMAIN_PROFILE, code, k,
                                 ctx["init_seed"], ctx["epoch"], e_abs, rep)
            if code == seeding.CODE_ICD:
                start = int(rng.integers(full.shape[0]))
                x_pos = _positive_particle(row, code, e_abs, rng)
                x_start = binarize(full[start], rng)
                est = icd_k_estimate(x_pos, x_start, k, p, rng)
            else:
                x_pos = _positive_particle(row, code, e_abs, rng)
                if code == seeding.CODE_BASELINE:
                    est = baseline_estimate(x_pos, p, rng, cfg.k_baseline)
                else:
                    est = cd_k_estimate(x_pos, k, p, rng)
            estimates.append(est)
        out[pos] = per_element_variance(estimates)
    return out


def _group_chunk(task):
    """Streaming moments of mean-of-k estimates over a chunk of chains."""
    code, k, chain_ids = task
    ctx = _CTX
    p: RbmParams = ctx["params"]
    cfg: ProtocolConfig = ctx["cfg"]
    full = ctx["intensities"]
    n_full = full.shape[0]
    mom = _Moments((p.n_v, p.n_h))
    for ci in chain_ids:
        rng = seeding.stream(cfg.seed, seeding.DOMAIN_PROFILE, code, k,
                             ctx["init_seed"], ctx["epoch"], ci)
        acc = np.zeros((p.n_v, p.n_h))
        if code == seeding.CODE_PCD:
            seed_row = full[int(rng.integers(n_full))]
            state = init_pcd_chain(binarize(seed_row, rng), cfg.pcd_burn_in, p, rng)
            for _ in range(k):
                x_pos = binarize(full[int(rng.integers(n_full))], rng)
                est, state = pcd_estimate(x_pos, state, p, rng)
                acc += est.dW
        else:
            for _ in range(k):
                x_pos = binarize(full[int(rng.integers(n_full))], rng)
                acc += baseline_estimate(x_pos, p, rng, cfg.k_baseline).dW
        mom.add(acc / k)
    return mom.n, mom.mean, mom.m2


def _point_variances(ctx, code: int, k: int, indices: np.ndarray,
                     jobs: int) -> np.ndarray:
    tasks = [(code, k, indices[i:i + _POINT_CHUNK])
             for i in range(0, len(indices), _POINT_CHUNK)]
    return np.concatenate(_run_chunks(ctx, tasks, _point_chunk, jobs))


def _group_variance(ctx, code: int, k: int, n_chains: int, jobs: int) -> float:
    chain_ids = np.arange(n_chains)
    tasks = [(code, k, chain_ids[i:i + _CHAIN_CHUNK])
             for i in range(0, n_chains, _CHAIN_CHUNK)]
    shape = (ctx["params"].n_v, ctx["params"].n_h)
    total = _Moments(shape)
    for n, mean, m2 in _run_chunks(ctx, tasks, _group_chunk, jobs):
        total.merge(n, mean, m2)
    return total.mean_element_variance()


def _params_digest(p: RbmParams) -> str:
    h = hashlib.sha256()
    for a in (p.W, p.b, p.c):
        h.update(a.tobytes())
    return h.hexdigest()


def _baseline_example_variances(checkpoint, data, cfg, jobs: int) -> np.ndarray:
    """Per-example baseline variances, shared by the CD and I-CD profiles."""
    ctx = _make_ctx(checkpoint, data, cfg)
    idx = subset_indices(data.n_examples, cfg.example_subset_size)
    return _point_variances(ctx, seeding.CODE_BASELINE, cfg.k_baseline, idx, jobs)


def _pointwise_profile(checkpoint, data, cfg, jobs, code, label,
                       baseline_vars) -> list:
    ctx = _make_ctx(checkpoint, data, cfg)
    digest = _params_digest(checkpoint.params)
    idx = subset_indices(data.n_examples, cfg.example_subset_size)
    if baseline_vars is None:
        baseline_vars = _point_variances(ctx, seeding.CODE_BASELINE,
                                         cfg.k_baseline, idx, jobs)
    baseline_mean = float(np.mean(baseline_vars))
    rows = []
    for k in cfg.k_values:
        mean_var = float(np.mean(_point_variances(ctx, code, k, idx, jobs)))
        rows.append(VarianceRow(
            dataset_id=data.id, init_seed=checkpoint.train_seed,
            epoch=checkpoint.epoch, strategy=label, k=k,
            mean_variance=mean_var, baseline_mean_variance=baseline_mean,
            ratio=mean_var / baseline_mean,
        ))
    assert _params_digest(checkpoint.params) == digest, "profile mutated params"
    return rows


def profile_cd(checkpoint: Checkpoint, data: Dataset, cfg: ProtocolConfig,
               jobs: int = 1, _baseline_vars=None) -> list:
    """CD-k variance rows for each configured k against the baseline."""
    return _pointwise_profile(checkpoint, data, cfg, jobs, seeding.CODE_CD,
                              Strategy.CD.value, _baseline_vars)


def profile_icd(checkpoint: Checkpoint, data: Dataset, cfg: ProtocolConfig,
                jobs: int = 1, pin_start_to_positive: bool = False,
                _baseline_vars=None) -> list:
    """I-CD-k variance rows: negative chains start at a uniformly drawn
    training example (drawn from the full dataset, collisions allowed).

    With ``pin_start_to_positive`` the start draw is skipped and the chain
    starts at the positive particle under the CD stream plan, which makes
    the rows numerically identical to ``profile_cd`` (degenerate coupling).
    """
    code = seeding.CODE_CD if pin_start_to_positive else seeding.CODE_ICD
    return _pointwise_profile(checkpoint, data, cfg, jobs, code,
                              Strategy.ICD.value, _baseline_vars)


def profile_pcd_mean(checkpoint: Checkpoint, data: Dataset, cfg: ProtocolConfig,
                     jobs: int = 1) -> list:
    """PCD subsequent-mean variance rows.

    For each k: means of k consecutive persistent-chain estimates (chain
    freshly burned in from a random training example, fresh random positive
    particle each step, no learning in between) against means of k
    independent baseline estimates.  The group size is
    repeats_per_example * working-set size.
    """
    ctx = _make_ctx(checkpoint, data, cfg)
    digest = _params_digest(checkpoint.params)
    idx = subset_indices(data.n_examples, cfg.example_subset_size)
    n_chains = cfg.repeats_per_example * len(idx)
    if n_chains < 2:
        raise ProtocolError("PCD protocol needs at least 2 chains per group")
    rows = []
    for k in cfg.pcd_mean_lengths:
        var_pcd = _group_variance(ctx, seeding.CODE_PCD, k, n_chains, jobs)
        var_base = _group_variance(ctx, seeding.CODE_BASELINE_GROUP, k,
                                   n_chains, jobs)
        rows.append(VarianceRow(
            dataset_id=data.id, init_seed=checkpoint.train_seed,
            epoch=checkpoint.epoch, strategy=Strategy.PCD.value, k=k,
            mean_variance=var_pcd, baseline_mean_variance=var_base,
            ratio=var_pcd / var_base,
        ))
    assert _params_digest(checkpoint.params) == digest, "profile mutated params"
    return rows


def aggregate(rows, n_inits: int) -> list:
    """Mean and spread of the ratio across init seeds, one cell per
    (dataset, strategy, k, epoch).

    Every cell must carry exactly one row per init seed, for ``n_inits``
    seeds total.  The spread is the population standard deviation over the
    per-init ratios (zero, with a warning flag, for a single init).
    """
    seeds = sorted({r.init_seed for r in rows})
    if len(seeds) != n_inits:
        raise ProtocolError(
            f"rows carry {len(seeds)} init seeds {seeds}, expected {n_inits}"
        )
    cells = {}
    for r in rows:
        cells.setdefault((r.dataset_id, r.strategy, r.k, r.epoch), {})
        cell = cells[(r.dataset_id, r.strategy, r.k, r.epoch)]
        if r.init_seed in cell:
            raise ProtocolError(
                f"duplicate row for cell {(r.dataset_id, r.strategy, r.k, r.epoch)}"
                f" init seed {r.init_seed}"
            )
        cell[r.init_seed] = r.ratio
    missing = [(key, seed) for key, cell in sorted(cells.items())
               for seed in seeds if seed not in cell]
    if missing:
        raise ProtocolError(f"missing protocol cells: {missing}")
    out = []
    for (dataset_id, strategy, k, epoch), cell in sorted(cells.items()):
        ratios = np.array([cell[s] for s in seeds])
        out.append(AggregateCell(
            dataset_id=dataset_id, strategy=strategy, k=k, epoch=epoch,
            mean_ratio=float(ratios.mean()), std_ratio=float(ratios.std(ddof=0)),
            n_inits=n_inits, single_init=(n_inits == 1),
        ))
    return out
