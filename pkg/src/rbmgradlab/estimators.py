"""Single-data-point stochastic gradient estimators.

Each estimator produces the gradient of the per-example log likelihood as
``positive statistic - negative statistic``.  Chains sample binary hidden
states at every step; only the final gradient statistics substitute the
conditional hidden probabilities for the last binary sample, which removes
that sampling step's noise analytically.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .model import RbmParams, _gibbs_kernel, as_binary, gibbs_chain, hidden_conditional


class Strategy(str, enum.Enum):
    CD = "cd"
    PCD = "pcd"
    ICD = "icd"
    BASELINE = "baseline"


DEFAULT_BASELINE_K = 1000


@dataclass(frozen=True)
class GradientEstimate:
    """One stochastic estimate of the log-likelihood gradient.

    ``dW`` is always positive-statistic minus negative-statistic; the bias
    gradients ``db``/``dc`` are carried for training but excluded from all
    variance statistics.
    """

    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray
    strategy: Strategy
    k_used: int

    def __post_init__(self):
        if self.dW.shape != (self.db.size, self.dc.size):
            raise DimensionMismatchError(
                f"dW has shape {self.dW.shape}, expected ({self.db.size}, {self.dc.size})"
            )
        for name, a in (("dW", self.dW), ("db", self.db), ("dc", self.dc)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite entries in {name}")


@dataclass(frozen=True)
class PcdChainState:
    """Persistent negative particle(s) carried between estimates."""

    negatives: tuple
    steps_taken: int

    def __post_init__(self):
        if self.steps_taken < 0:
            raise ValueError("steps_taken must be >= 0")
        if not self.negatives:
            raise ValueError("state must hold at least one particle")


def positive_statistic(x, p: RbmParams) -> np.ndarray:
    """x . hidden_conditional(x)^T, the data-driven weight statistic.

    Deterministic: the hidden sample is replaced by its conditional
    probabilities, so no RNG is consumed.
    """
    x = as_binary(x, p.n_v, "positive particle")
    return np.outer(x, hidden_conditional(x, p))


def negative_statistic(x_neg, p: RbmParams) -> np.ndarray:
    """Same statistic evaluated at the negative particle."""
    x_neg = as_binary(x_neg, p.n_v, "negative particle")
    return np.outer(x_neg, hidden_conditional(x_neg, p))


def _assemble(x_pos: np.ndarray, x_neg: np.ndarray, p: RbmParams,
              strategy: Strategy, k_used: int) -> GradientEstimate:
    h_pos = hidden_conditional(x_pos, p)
    h_neg = hidden_conditional(x_neg, p)
    return GradientEstimate(
        dW=np.outer(x_pos, h_pos) - np.outer(x_neg, h_neg),
        db=x_pos - x_neg,
        dc=h_pos - h_neg,
        strategy=strategy,
        k_used=k_used,
    )


def cd_k_estimate(x, k: int, p: RbmParams, rng: np.random.Generator,
                  _strategy: Strategy = Strategy.CD) -> GradientEstimate:
    """CD-k: the negative chain starts at the positive particle itself."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = as_binary(x, p.n_v, "positive particle")
    return _assemble(x, gibbs_chain(x, k, p, rng), p, _strategy, k)


def baseline_estimate(x, p: RbmParams, rng: np.random.Generator,
                      k_baseline: int = DEFAULT_BASELINE_K) -> GradientEstimate:
    """Long-chain estimate treated as near-exact model sampling."""
    return cd_k_estimate(x, k_baseline, p, rng, _strategy=Strategy.BASELINE)


def icd_k_estimate(x_pos, x_start, k: int, p: RbmParams,
                   rng: np.random.Generator) -> GradientEstimate:
    """CD-k with an independent start: the negative chain begins at a
    caller-chosen training example rather than the positive particle."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x_pos = as_binary(x_pos, p.n_v, "positive particle")
    return _assemble(x_pos, gibbs_chain(x_start, k, p, rng), p, Strategy.ICD, k)


def init_pcd_chain(x_seed, burn_in: int, p: RbmParams,
                   rng: np.random.Generator) -> PcdChainState:
    """Burn a persistent chain in with ``burn_in`` Gibbs sweeps from a seed."""
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    particle = gibbs_chain(x_seed, burn_in, p, rng)
    return PcdChainState(negatives=(particle,), steps_taken=burn_in)


def pcd_estimate(x_pos, state: PcdChainState, p: RbmParams,
                 rng: np.random.Generator):
    """Advance the persistent particle one Gibbs sweep and estimate with it.

    Returns ``(estimate, new_state)``; the input state is left untouched.
    """
    if len(state.negatives) != 1:
        raise ValueError("pcd_estimate operates on single-particle states")
    x_pos = as_binary(x_pos, p.n_v, "positive particle")
    particle = as_binary(state.negatives[0], p.n_v, "persistent particle")
    particle = _gibbs_kernel(particle, p, rng)
    estimate = _assemble(x_pos, particle, p, Strategy.PCD, 1)
    return estimate, PcdChainState(negatives=(particle,),
                                   steps_taken=state.steps_taken + 1)
