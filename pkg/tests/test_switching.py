"""Switch-rate predictor vs direct simulation."""

import numpy as np
import pytest
from scipy.special import expit

from banditlab import (
    BayesAgentSpec,
    Environment,
    LearningRateSet,
    Policy,
    QAgentSpec,
    QState,
    StepSchedule,
    ensemble_switch_rate,
    min_switch_vs_taucut,
    switch_prob,
)


def mc_one_step(q1, q2, apc, amc, apu, amu, p1, p2, beta, n, seed):
    """Simulate one trial + re-decision for n independent agents."""
    rng = np.random.default_rng(seed)
    pi1 = expit(beta * (q1 - q2))
    a0 = np.where(rng.random(n) < pi1, 1, 2)
    r1 = rng.random(n) < p1
    r2 = rng.random(n) < p2
    c1 = a0 == 1
    rc = np.where(c1, r1, r2)
    ru = np.where(c1, r2, r1)
    gain_c = np.where(rc, apc, 0.0)
    loss_c = np.where(rc, 0.0, amc)
    gain_u = np.where(ru, apu, 0.0)
    loss_u = np.where(ru, 0.0, amu)
    nq1 = np.where(c1, q1 + gain_c * (1 - q1) - loss_c * q1,
                   q1 + gain_u * (1 - q1) - loss_u * q1)
    nq2 = np.where(c1, q2 + gain_u * (1 - q2) - loss_u * q2,
                   q2 + gain_c * (1 - q2) - loss_c * q2)
    a1 = np.where(rng.random(n) < expit(beta * (nq1 - nq2)), 1, 2)
    return float(np.mean(a0 != a1))


def test_indifferent_policy_switches_half_the_time():
    rates = LearningRateSet(0.3, 0.1, 0.05, 0.2)
    for q in (QState(0.5, 0.5), QState(0.9, 0.1), QState(0.2, 0.7)):
        assert switch_prob(q, rates, 0.8, 0.3, beta=0.0) == pytest.approx(0.5)


def test_frozen_values_switch_like_two_coin_flips():
    rates = LearningRateSet(0.0, 0.0, 0.0, 0.0)
    for beta in (0.5, 3.0, 10.0):
        for q in (QState(0.6, 0.4), QState(0.5, 0.5), QState(0.1, 0.8)):
            pi1 = expit(beta * (q.q1 - q.q2))
            want = 2.0 * pi1 * (1.0 - pi1)
            assert switch_prob(q, rates, 0.5, 0.5, beta) == pytest.approx(want, abs=1e-14)


def test_switch_prob_matches_monte_carlo():
    q1, q2, beta = 0.6, 0.4, 5.0
    rates = LearningRateSet(0.1, 0.1, 0.1, 0.1)
    k = switch_prob(QState(q1, q2), rates, 0.5, 0.5, beta)
    n = 1_000_000
    k_hat = mc_one_step(q1, q2, 0.1, 0.1, 0.1, 0.1, 0.5, 0.5, beta, n, seed=7)
    se = np.sqrt(k * (1 - k) / n)
    assert abs(k - k_hat) < 4 * se


def test_no_feedback_on_unchosen_equals_zero_rates():
    q = QState(0.55, 0.35)
    full = LearningRateSet(0.2, 0.1, 0.15, 0.25)
    zeroed = LearningRateSet(0.2, 0.1, 0.0, 0.0)
    a = switch_prob(q, full, 0.7, 0.4, beta=4.0, counterfactual=False)
    b = switch_prob(q, zeroed, 0.7, 0.4, beta=4.0, counterfactual=True)
    assert a == pytest.approx(b, abs=1e-15)


def test_switch_prob_monotone_in_each_rate():
    # stabilising rates push K down, destabilising rates push it up
    rng = np.random.default_rng(42)
    base = (0.2, 0.2, 0.2, 0.2)
    for _ in range(50):
        q = QState(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
        p1, p2 = rng.uniform(0.1, 0.9, size=2)
        beta = rng.uniform(0.5, 8.0)
        k0 = switch_prob(q, LearningRateSet(*base), p1, p2, beta)
        for i, sign in enumerate([-1, +1, +1, -1]):  # apc, amc, apu, amu
            bumped = list(base)
            bumped[i] += 0.15
            k1 = switch_prob(q, LearningRateSet(*bumped), p1, p2, beta)
            assert sign * (k1 - k0) >= -1e-12


def test_ensemble_analytic_tracks_realized_switches():
    env = Environment(p1=0.5, p2=0.5, counterfactual=True, horizon=30)
    agent = QAgentSpec(LearningRateSet.constant(0.15), Policy(beta=5.0))
    series = ensemble_switch_rate(agent, env, n_replicas=4000, seed=11)
    assert series.t.shape == (30,)
    resid = series.analytic_mean - series.empirical_mean
    se = np.sqrt(series.analytic_se**2 + series.empirical_se**2)
    assert np.all(np.abs(resid) < 5 * se)
    # learning suppresses switching relative to the first trials
    assert series.analytic_mean[-1] < series.analytic_mean[0]


def test_ensemble_supports_bayes_agents():
    env = Environment(p1=0.5, p2=0.5, counterfactual=True, horizon=25)
    series = ensemble_switch_rate(BayesAgentSpec(Policy(beta=8.0)), env,
                                  n_replicas=4000, seed=3)
    resid = series.analytic_mean - series.empirical_mean
    se = np.sqrt(series.analytic_se**2 + series.empirical_se**2)
    assert np.all(np.abs(resid) < 5 * se)


def test_greedy_policy_has_no_switch_series():
    env = Environment(p1=0.5, p2=0.5, counterfactual=True, horizon=10)
    agent = QAgentSpec(LearningRateSet.constant(0.1), Policy(beta=5.0, mode="greedy"))
    with pytest.raises(ValueError):
        ensemble_switch_rate(agent, env, n_replicas=10, seed=0)


def test_rate_drop_schedule_suppresses_late_switching():
    env = Environment(p1=0.5, p2=0.5, counterfactual=True, horizon=40)
    tau = 20
    sched = StepSchedule(0.3, 0.02, tau)
    slow = QAgentSpec(LearningRateSet.constant(0.3, schedule=sched), Policy(beta=5.0))
    flat = QAgentSpec(LearningRateSet.constant(0.3), Policy(beta=5.0))
    s_slow = ensemble_switch_rate(slow, env, n_replicas=3000, seed=5)
    s_flat = ensemble_switch_rate(flat, env, n_replicas=3000, seed=5)
    # identical streams before the cut, then an immediate dip in switching
    np.testing.assert_allclose(s_slow.analytic_mean[:tau], s_flat.analytic_mean[:tau],
                               rtol=0, atol=1e-12)
    assert s_slow.analytic_mean[tau] < s_flat.analytic_mean[tau] - 0.02
    assert int(np.argmin(s_slow.analytic_mean)) >= tau
    # with the rate frozen low, value spreads wash out and switching creeps up
    assert s_slow.analytic_mean[-1] > s_slow.analytic_mean[tau]


def test_min_switch_grid_shares_streams():
    pts = min_switch_vs_taucut([0.2, 0.4], 0.05, [5, 10], p=0.5, beta=5.0,
                               n_replicas=800, seed=9, horizon=20)
    assert len(pts) == 4
    for pt in pts:
        assert 0.0 <= pt.k_min <= 1.0
        assert 0 <= pt.t_min < 20
        assert pt.alpha1 in (0.2, 0.4)
        assert pt.tau_c in (5, 10)
