"""Core model operations against independent brute-force oracles.

The oracles below enumerate the joint state space directly with plain
Python loops and raw exponentials; they share no code with the package's
softplus/log-sum-exp paths.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbmgradlab import (
    RbmParams,
    energy,
    exact_log_likelihood,
    exact_log_partition,
    exact_model_expectation,
    exact_visible_distribution,
    free_energy,
    gibbs_step,
    hidden_conditional,
    visible_conditional,
)
from rbmgradlab.errors import DimensionMismatchError, EnumerationLimitError


def brute_force_log_partition(p: RbmParams) -> float:
    total = 0.0
    for x in itertools.product([0.0, 1.0], repeat=p.n_v):
        for h in itertools.product([0.0, 1.0], repeat=p.n_h):
            x_a, h_a = np.array(x), np.array(h)
            total += math.exp(p.b @ x_a + p.c @ h_a + x_a @ p.W @ h_a)
    return math.log(total)


def brute_force_free_energy(x, p: RbmParams) -> float:
    x_a = np.asarray(x, dtype=float)
    total = 0.0
    for h in itertools.product([0.0, 1.0], repeat=p.n_h):
        h_a = np.array(h)
        total += math.exp(p.b @ x_a + p.c @ h_a + x_a @ p.W @ h_a)
    return math.log(total)


def brute_force_model_expectation(p: RbmParams) -> np.ndarray:
    log_z = brute_force_log_partition(p)
    out = np.zeros((p.n_v, p.n_h))
    for x in itertools.product([0.0, 1.0], repeat=p.n_v):
        for h in itertools.product([0.0, 1.0], repeat=p.n_h):
            x_a, h_a = np.array(x), np.array(h)
            prob = math.exp(p.b @ x_a + p.c @ h_a + x_a @ p.W @ h_a - log_z)
            out += prob * np.outer(x_a, h_a)
    return out


def random_params(rng, n_v, n_h, scale=1.0) -> RbmParams:
    return RbmParams(
        rng.normal(0.0, scale, (n_v, n_h)),
        rng.normal(0.0, scale, n_v),
        rng.normal(0.0, scale, n_h),
    )


small_params = st.builds(
    random_params,
    st.integers(0, 10_000).map(np.random.default_rng),
    st.integers(1, 4),
    st.integers(1, 4),
    st.floats(0.1, 2.0),
)


# --- energy ----------------------------------------------------------------

def test_energy_zero_params():
    p = RbmParams.zeros(3, 2)
    assert energy([1, 0, 1], [1, 1], p) == 0.0


def test_energy_half_weights():
    p = RbmParams(np.full((2, 2), 0.5), np.zeros(2), np.zeros(2))
    assert energy([1, 1], [1, 1], p) == pytest.approx(-2.0)


def test_energy_scalar_model():
    p = RbmParams([[1.0]], [2.0], [3.0])
    assert energy([1], [1], p) == pytest.approx(-6.0)


def test_energy_dimension_mismatch():
    p = RbmParams.zeros(3, 2)
    with pytest.raises(DimensionMismatchError):
        energy([1, 0], [1, 1], p)
    with pytest.raises(DimensionMismatchError):
        energy([1, 0, 1], [1, 1, 0], p)


# --- conditionals -----------------------------------------------------------

def test_hidden_conditional_zero_params():
    np.testing.assert_array_equal(
        hidden_conditional([0, 1], RbmParams.zeros(2, 3)), np.full(3, 0.5)
    )


def test_hidden_conditional_saturation():
    p = RbmParams(np.zeros((2, 2)), np.zeros(2), np.array([30.0, 30.0]))
    assert np.all(np.abs(hidden_conditional([0, 0], p) - 1.0) < 1e-9)


def test_hidden_conditional_logistic_value():
    # sigma(1) evaluated to high precision: 1 / (1 + exp(-1))
    p = RbmParams([[1.0]], [0.0], [0.0])
    assert hidden_conditional([1], p)[0] == pytest.approx(0.7310585786300049,
                                                          abs=1e-12)


def test_visible_conditional_zero_params():
    np.testing.assert_array_equal(
        visible_conditional([1, 0, 1], RbmParams.zeros(2, 3)), np.full(2, 0.5)
    )


def test_visible_conditional_saturation_low():
    p = RbmParams(np.zeros((2, 2)), np.array([-30.0, -30.0]), np.zeros(2))
    assert np.all(visible_conditional([0, 0], p) < 1e-9)


def test_visible_conditional_logistic_value():
    # sigma(-1) = 1 / (1 + exp(1))
    p = RbmParams([[-1.0]], [0.0], [0.0])
    assert visible_conditional([1], p)[0] == pytest.approx(0.2689414213699951,
                                                           abs=1e-12)


def test_conditional_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        hidden_conditional([1, 0, 0], RbmParams.zeros(2, 3))
    with pytest.raises(DimensionMismatchError):
        visible_conditional([1], RbmParams.zeros(2, 3))


@given(small_params)
@settings(max_examples=30, deadline=None)
def test_conditional_consistency_with_joint(p):
    # P(h_j = 1 | x) recovered from the raw joint: sum over h with h_j = 1
    rng = np.random.default_rng(7)
    x = (rng.random(p.n_v) < 0.5).astype(float)
    joint_num = np.zeros(p.n_h)
    joint_den = 0.0
    for h in itertools.product([0.0, 1.0], repeat=p.n_h):
        h_a = np.array(h)
        w = math.exp(p.b @ x + p.c @ h_a + x @ p.W @ h_a)
        joint_num += w * h_a
        joint_den += w
    np.testing.assert_allclose(hidden_conditional(x, p), joint_num / joint_den,
                               atol=1e-10)


# --- gibbs_step --------------------------------------------------------------

def test_gibbs_step_zero_params_uniform():
    p = RbmParams.zeros(3, 3)
    rng = np.random.default_rng(11)
    x = np.zeros(3)
    counts = np.zeros(3)
    n = 10_000
    for _ in range(n):
        x = gibbs_step(x, p, rng)
        counts += x
    assert np.all(counts / n >= 0.48) and np.all(counts / n <= 0.52)


def test_gibbs_step_saturated_bias():
    p = RbmParams(np.zeros((4, 2)), np.full(4, 30.0), np.zeros(2))
    rng = np.random.default_rng(5)
    for _ in range(200):
        np.testing.assert_array_equal(gibbs_step(np.zeros(4), p, rng), np.ones(4))


def test_gibbs_step_deterministic():
    rng_a = np.random.default_rng(99)
    p = random_params(np.random.default_rng(1), 5, 4)
    x = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    out_a = gibbs_step(x, p, np.random.default_rng(123))
    out_b = gibbs_step(x, p, np.random.default_rng(123))
    np.testing.assert_array_equal(out_a, out_b)
    assert rng_a.bit_generator.state == np.random.default_rng(99).bit_generator.state


def test_gibbs_step_draw_order_contract():
    # reconstruct the step by hand: n_h hidden uniforms then n_v visible ones
    p = random_params(np.random.default_rng(2), 4, 3)
    x = np.array([1.0, 1.0, 0.0, 1.0])
    rng = np.random.default_rng(77)
    out = gibbs_step(x, p, rng)

    ref = np.random.default_rng(77)
    u_h = ref.random(3)
    h = (u_h < hidden_conditional(x, p)).astype(float)
    u_v = ref.random(4)
    expected = (u_v < visible_conditional(h, p)).astype(float)
    np.testing.assert_array_equal(out, expected)
    # exactly n_h + n_v uniforms were consumed
    assert rng.bit_generator.state == ref.bit_generator.state


# --- free energy --------------------------------------------------------------

def test_free_energy_zero_params():
    assert free_energy([0, 1], RbmParams.zeros(2, 3)) == pytest.approx(
        3 * math.log(2), abs=1e-12
    )


def test_free_energy_bias_only():
    p = RbmParams(np.zeros((1, 1)), [1.0], [0.0])
    assert free_energy([1], p) == pytest.approx(1 + math.log(2), abs=1e-12)


def test_free_energy_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = random_params(rng, 3, 4)
        x = (rng.random(3) < 0.5).astype(float)
        assert free_energy(x, p) == pytest.approx(
            brute_force_free_energy(x, p), abs=1e-10
        )


def test_free_energy_stable_at_saturation():
    p = RbmParams(np.zeros((2, 2)), np.zeros(2), np.array([1000.0, -1000.0]))
    value = free_energy([1, 1], p)
    assert math.isfinite(value)
    assert value == pytest.approx(1000.0, abs=1e-9)


# --- exact enumeration ---------------------------------------------------------

def test_log_partition_zero_params():
    assert exact_log_partition(RbmParams.zeros(2, 3)) == pytest.approx(
        5 * math.log(2), abs=1e-12
    )


def test_log_partition_scalar_model():
    # independent 4-state sum gives ln(3 + e)
    p = RbmParams([[1.0]], [0.0], [0.0])
    expected = brute_force_log_partition(p)
    assert expected == pytest.approx(math.log(3 + math.e), abs=1e-12)
    assert exact_log_partition(p) == pytest.approx(expected, abs=1e-10)


def test_log_partition_side_selection():
    # only the smaller side must fit within the limit
    p = RbmParams.zeros(1, 21)
    assert exact_log_partition(p, limit=20) == pytest.approx(
        22 * math.log(2), abs=1e-10
    )
    with pytest.raises(EnumerationLimitError):
        exact_log_partition(RbmParams.zeros(21, 21), limit=20)


@given(small_params)
@settings(max_examples=25, deadline=None)
def test_log_partition_matches_brute_force(p):
    assert exact_log_partition(p) == pytest.approx(
        brute_force_log_partition(p), abs=1e-10
    )


def test_model_expectation_zero_params():
    np.testing.assert_allclose(
        exact_model_expectation(RbmParams.zeros(3, 2)), np.full((3, 2), 0.25),
        atol=1e-12,
    )


def test_model_expectation_scalar_model():
    p = RbmParams([[1.0]], [0.0], [0.0])
    expected = brute_force_model_expectation(p)[0, 0]
    assert expected == pytest.approx(math.e / (3 + math.e), abs=1e-12)
    assert exact_model_expectation(p)[0, 0] == pytest.approx(expected, abs=1e-10)


@given(small_params)
@settings(max_examples=25, deadline=None)
def test_model_expectation_matches_brute_force(p):
    np.testing.assert_allclose(
        exact_model_expectation(p), brute_force_model_expectation(p), atol=1e-10
    )


def test_model_expectation_hidden_side_enumeration():
    # force the hidden-side path (n_h < n_v) and compare against brute force
    p = random_params(np.random.default_rng(8), 5, 3)
    np.testing.assert_allclose(
        exact_model_expectation(p), brute_force_model_expectation(p), atol=1e-10
    )


def test_model_expectation_long_chain_cross_check():
    # empirical mean of long-chain negative statistics approaches the oracle
    from rbmgradlab import baseline_estimate, positive_statistic

    rng = np.random.default_rng(21)
    p = random_params(rng, 4, 4, scale=0.8)
    x = np.array([1.0, 0.0, 1.0, 0.0])
    pos = positive_statistic(x, p)
    n = 4000
    acc = np.zeros((4, 4))
    for _ in range(n):
        acc += pos - baseline_estimate(x, p, rng, k_baseline=60).dW
    mc = acc / n
    exact = exact_model_expectation(p)
    assert np.all(np.abs(mc - exact) < 0.035)  # ~5 sigma at n=4000


# --- exact log likelihood -------------------------------------------------------

def test_log_likelihood_zero_params():
    p = RbmParams.zeros(2, 2)
    for x in ([0, 0], [0, 1], [1, 0], [1, 1]):
        assert exact_log_likelihood(x, p) == pytest.approx(-2 * math.log(2),
                                                           abs=1e-12)


@given(small_params)
@settings(max_examples=25, deadline=None)
def test_log_likelihood_normalizes(p):
    total = sum(
        math.exp(exact_log_likelihood(np.array(x), p))
        for x in itertools.product([0.0, 1.0], repeat=p.n_v)
    )
    assert total == pytest.approx(1.0, abs=1e-10)


@given(small_params)
@settings(max_examples=20, deadline=None)
def test_joint_normalization(p):
    # exp(-E)/Z over all joint states sums to one
    log_z = exact_log_partition(p)
    total = 0.0
    for x in itertools.product([0.0, 1.0], repeat=p.n_v):
        for h in itertools.product([0.0, 1.0], repeat=p.n_h):
            total += math.exp(-energy(np.array(x), np.array(h), p) - log_z)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_gradient_matches_finite_differences():
    # d log P(x) / dW_ij: analytic vs central differences at h = 1e-5
    rng = np.random.default_rng(17)
    step = 1e-5
    for _ in range(10):
        p = random_params(rng, 4, 4)
        x = (rng.random(4) < 0.5).astype(float)
        analytic = np.outer(x, hidden_conditional(x, p)) - exact_model_expectation(p)
        for i in range(4):
            for j in range(4):
                W_hi, W_lo = p.W.copy(), p.W.copy()
                W_hi[i, j] += step
                W_lo[i, j] -= step
                fd = (
                    exact_log_likelihood(x, RbmParams(W_hi, p.b, p.c))
                    - exact_log_likelihood(x, RbmParams(W_lo, p.b, p.c))
                ) / (2 * step)
                assert abs(fd - analytic[i, j]) < 1e-6


def test_exact_visible_distribution_sums_to_one():
    p = random_params(np.random.default_rng(4), 3, 5)
    states, probs = exact_visible_distribution(p)
    assert states.shape == (8, 3)
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    # consistent with the per-state likelihoods
    for state, prob in zip(states, probs):
        assert prob == pytest.approx(math.exp(exact_log_likelihood(state, p)),
                                     abs=1e-12)


# --- parameter container -------------------------------------------------------

def test_params_validation():
    with pytest.raises(DimensionMismatchError):
        RbmParams(np.zeros((2, 3)), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        RbmParams(np.full((1, 1), np.nan), np.zeros(1), np.zeros(1))


def test_params_immutable():
    p = RbmParams.zeros(2, 2)
    with pytest.raises(ValueError):
        p.W[0, 0] = 1.0
