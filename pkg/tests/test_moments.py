"""Moment-propagation oracles: exact enumerations, closed forms, symmetry checks."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from banditlab import (
    ConvergenceError,
    LearningRateSet,
    MomentState,
    bias_sensitivity,
    compute_coefficients,
    confirmation_index,
    propagate_moments,
    propagate_moments_bayes,
    steady_state_delta,
    steady_state_delta_const,
    steady_state_delta_quadratic,
    steady_state_moments,
    step_delta,
    step_moments,
    step_moments_bayes,
    x_curve_rates,
)
from banditlab.agents import QState, RewardPair, q_update


def symmetric_pair_moments(a, b):
    # ensemble {(a,b),(b,a)} with equal weight satisfies the m1=m2 reduction
    return MomentState((a + b) / 2.0, (a * a + b * b) / 2.0, a * b)


def exact_step_symmetric_pair(a, b, rates, p):
    """One exact master-equation step at beta=0 from the two-atom ensemble
    {(a,b),(b,a)}, by enumerating action x reward-pair outcomes."""
    m1 = m11 = m12 = 0.0
    for qa, qb in ((a, b), (b, a)):
        for chosen in (1, 2):
            for r1, r2 in product((0, 1), repeat=2):
                w = 0.5 * 0.5 * (p if r1 else 1 - p) * (p if r2 else 1 - p)
                q = q_update(QState(qa, qb), chosen, RewardPair(r1, r2), rates)
                m1 += w * q.q1
                m11 += w * q.q1 * q.q1
                m12 += w * q.q1 * q.q2
    return MomentState(m1, m11, m12)


@pytest.mark.parametrize("rates", [
    LearningRateSet(0.15, 0.05, 0.05, 0.15),
    LearningRateSet(0.3, 0.1, 0.2, 0.4),
    LearningRateSet(0.12, 0.0, 0.0, 0.5),
    LearningRateSet.constant(0.1),
])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_step_matches_exact_enumeration_at_beta_zero(rates, p):
    for a, b in ((0.5, 0.5), (0.6, 0.4), (0.9, 0.2)):
        m = symmetric_pair_moments(a, b)
        got = step_moments(m, rates, p, 0.0)
        want = exact_step_symmetric_pair(a, b, rates, p)
        np.testing.assert_allclose(
            [got.m1, got.m11, got.m12], [want.m1, want.m11, want.m12],
            rtol=0, atol=1e-12)


def test_coefficients_match_conditional_expectation_factorization():
    # one-step conditional keep/gain factors, rebuilt in exact arithmetic
    apc, amc, apu, amu = Fraction(3, 20), Fraction(1, 20), Fraction(1, 10), Fraction(2, 5)
    p = Fraction(3, 10)
    keep_c = p * (1 - apc) + (1 - p) * (1 - amc)
    keep_u = p * (1 - apu) + (1 - p) * (1 - amu)
    c = compute_coefficients(
        LearningRateSet(float(apc), float(amc), float(apu), float(amu)), float(p))
    assert c.mean_keep == pytest.approx(float(keep_u), abs=1e-15)
    assert c.mean_pi_q == pytest.approx(float(keep_c - keep_u), abs=1e-15)
    assert c.mean_pi == pytest.approx(float(p * (apc - apu)), abs=1e-15)
    assert c.mean_const == pytest.approx(float(p * apu), abs=1e-15)
    assert c.cross_keep == pytest.approx(float(keep_c * keep_u), abs=1e-15)
    assert c.cross_gain_chosen == pytest.approx(float(p * apc * keep_u), abs=1e-15)
    assert c.cross_gain_unchosen == pytest.approx(float(p * apu * keep_c), abs=1e-15)
    assert c.cross_const == pytest.approx(float(p * p * apc * apu), abs=1e-15)
    sq_keep_u = p * (1 - apu) ** 2 + (1 - p) * (1 - amu) ** 2
    sq_keep_c = p * (1 - apc) ** 2 + (1 - p) * (1 - amc) ** 2
    assert c.sq_keep_unchosen == pytest.approx(float(sq_keep_u), abs=1e-15)
    assert c.sq_keep_chosen == pytest.approx(float(sq_keep_c), abs=1e-15)
    assert c.sq_gain_unchosen == pytest.approx(float(2 * p * apu * (1 - apu)), abs=1e-15)
    assert c.sq_gain_chosen == pytest.approx(float(2 * p * apc * (1 - apc)), abs=1e-15)
    assert c.sq_const_unchosen == pytest.approx(float(p * apu ** 2), abs=1e-15)
    assert c.sq_const_chosen == pytest.approx(float(p * apc ** 2), abs=1e-15)


def enumerate_bayes_moments(p, horizon):
    """Brute-force moments of the decaying-rate unbiased learner by walking
    all 4^t reward sequences."""
    q1 = np.array([0.5])
    q2 = np.array([0.5])
    w = np.array([1.0])
    out = [MomentState(0.5, 0.25, 0.25)]
    for t in range(horizon):
        a = 1.0 / (t + 3)
        nq1, nq2, nw = [], [], []
        for r1, r2 in product((0, 1), repeat=2):
            pw = (p if r1 else 1 - p) * (p if r2 else 1 - p)
            nq1.append(q1 + a * (r1 - q1))
            nq2.append(q2 + a * (r2 - q2))
            nw.append(w * pw)
        q1 = np.concatenate(nq1)
        q2 = np.concatenate(nq2)
        w = np.concatenate(nw)
        out.append(MomentState(float(np.sum(w * q1)),
                               float(np.sum(w * q1 * q1)),
                               float(np.sum(w * q1 * q2))))
    return out


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_bayes_recursion_matches_enumeration(p):
    horizon = 6
    series = propagate_moments_bayes(MomentState.point_mass(0.5), p, horizon)
    oracle = enumerate_bayes_moments(p, horizon)
    for got, want in zip(series, oracle):
        np.testing.assert_allclose(
            [got.m1, got.m11, got.m12], [want.m1, want.m11, want.m12],
            rtol=0, atol=1e-12)


def test_unbiased_closure_reduces_to_bayes_recursion():
    # with equal rates the policy-coupled terms must cancel identically
    for alpha, p, beta in product((0.05, 0.3, 0.7), (0.2, 0.5), (0.0, 2.0, 7.0)):
        rates = LearningRateSet.constant(alpha)
        m = MomentState(0.41, 0.2, 0.15)
        got = step_moments(m, rates, p, beta)
        want = step_moments_bayes(m, alpha, p)
        np.testing.assert_allclose(
            [got.m1, got.m11, got.m12], [want.m1, want.m11, want.m12],
            rtol=0, atol=1e-12)


def test_propagate_with_decaying_schedule_matches_bayes_propagation():
    series_q = propagate_moments(MomentState.point_mass(0.5),
                                 LearningRateSet.bayes(), 0.6, 5.0, 30)
    series_b = propagate_moments_bayes(MomentState.point_mass(0.5), 0.6, 30)
    for mq, mb in zip(series_q, series_b):
        np.testing.assert_allclose([mq.m1, mq.m11, mq.m12],
                                   [mb.m1, mb.m11, mb.m12], rtol=0, atol=1e-12)


def test_step_delta_examples():
    assert step_delta(0.0, 0.1, 0.5) == pytest.approx(0.0025, abs=1e-15)
    assert step_delta(0.0, 1.0 / 3.0, 0.5) == pytest.approx(1.0 / 36.0, abs=1e-15)
    # contraction plus source
    d = 0.02
    assert step_delta(d, 0.2, 0.3) == pytest.approx(
        (1 - 0.2) ** 2 * d + 0.3 * 0.7 * 0.04, abs=1e-15)


def test_delta_series_consistency():
    p, alpha = 0.4, 0.25
    m = MomentState.point_mass(0.5)
    d = m.delta
    for _ in range(40):
        m = step_moments_bayes(m, alpha, p)
        d = step_delta(d, alpha, p)
        assert m.delta == pytest.approx(d, abs=1e-12)


def test_const_steady_state_formula():
    for alpha in (0.01, 0.1, 0.5, 0.9):
        for p in (0.1, 0.5, 0.9):
            ss = steady_state_delta_const(alpha, p)
            assert ss.delta == pytest.approx(p * (1 - p) * alpha / (2 - alpha),
                                             abs=1e-14)
            assert ss.relaxation_time == pytest.approx(1 / (alpha * (2 - alpha)),
                                                       abs=1e-12)
    with pytest.raises(ValueError):
        steady_state_delta_const(0.0, 0.5)
    with pytest.raises(ValueError):
        steady_state_delta_const(1.2, 0.5)


def test_iterated_delta_recursion_converges_to_formula():
    for alpha in (0.05, 0.3, 0.8):
        for p in (0.2, 0.6):
            d = 0.0
            for _ in range(5000):
                d = step_delta(d, alpha, p)
            assert d == pytest.approx(p * (1 - p) * alpha / (2 - alpha), abs=1e-10)


def test_steady_state_iteration_agrees_with_quadratic():
    for x in (0.6, 1.0, 1.3):
        for beta in (1.0, 3.0):
            rates = x_curve_rates(x)
            it = steady_state_moments(rates, 0.5, beta).delta
            quad = steady_state_delta_quadratic(rates, 0.5, beta)
            assert it == pytest.approx(quad, abs=1e-8)


def test_steady_state_unbiased_is_beta_independent():
    rates = LearningRateSet.constant(0.1)
    ds = [steady_state_delta(rates, 0.5, b) for b in (0.0, 1.0, 5.0, 20.0)]
    assert max(ds) - min(ds) < 1e-10
    assert ds[0] == pytest.approx(0.25 * 0.1 / 1.9, abs=1e-10)


def test_confirmation_bias_raises_steady_state_gap():
    d_unbiased = steady_state_delta(x_curve_rates(1.0), 0.5, 3.0)
    d_biased = steady_state_delta(x_curve_rates(1.4), 0.5, 3.0)
    assert d_biased > d_unbiased
    # and the effect grows with the inverse temperature
    d_hot = steady_state_delta(x_curve_rates(1.4), 0.5, 1.0)
    assert d_biased > d_hot


def test_steady_state_diverges_cleanly_when_feedback_too_strong():
    with pytest.raises(ConvergenceError):
        steady_state_delta(x_curve_rates(1.5), 0.5, 5.0)


def test_steady_state_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        steady_state_moments(LearningRateSet(0, 0, 0, 0), 0.5, 1.0)
    with pytest.raises(ValueError):
        steady_state_moments(LearningRateSet.bayes(), 0.5, 1.0)


def test_bias_sensitivity_signs():
    s = bias_sensitivity(1.2, 0.5, 3.0)
    assert s.d_delta_dbias > 0
    assert s.d2_delta_dbeta_dbias > 0
    with pytest.raises(ValueError):
        bias_sensitivity(1.2, 1.0, 3.0)


def test_x_curve_and_confirmation_index():
    r = x_curve_rates(1.0)
    assert (r.a_plus_c, r.a_minus_c, r.a_plus_u, r.a_minus_u) == (0.1,) * 4
    for x in (0.2, 0.9, 1.0, 1.7):
        assert confirmation_index(x_curve_rates(x)) == pytest.approx(x - 1,
                                                                     abs=1e-12)
    assert confirmation_index(LearningRateSet(0.3, 0.1, 0.1, 0.3)) == \
        pytest.approx(0.5, abs=1e-15)
    assert confirmation_index(LearningRateSet.constant(0.4)) == 0.0
    with pytest.raises(ValueError):
        confirmation_index(LearningRateSet(0, 0, 0, 0))


def test_moment_state_helpers():
    m = MomentState.point_mass(0.3)
    assert (m.m1, m.m11, m.m12) == (0.3, 0.09, 0.09)
    assert m.delta == 0.0
    assert MomentState(0.5, 0.30, 0.21).delta == pytest.approx(0.09)


def test_propagation_series_shape():
    series = propagate_moments(MomentState.point_mass(0.5),
                               LearningRateSet.constant(0.2), 0.5, 2.0, 10)
    assert len(series) == 11
    assert series[0] == MomentState.point_mass(0.5)
