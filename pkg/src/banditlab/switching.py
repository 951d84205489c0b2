"""One-step action-switching probabilities and their ensemble averages.

Because rewards are binary and the value update is deterministic given
the rewards, the one-step transition from a value state is a mixture
over at most eight outcomes (two actions times four reward pairs), so
the switching probability K is an exact finite sum; no integration is
involved.  Ensemble averages <K>_t pair this analytic per-state value
with the realized switch frequency of the same simulated replicas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .agents import (BayesAgentSpec, LearningRateSet, Policy, QAgentSpec,
                     QState, StepSchedule)
from .env import Environment
from .mc import DEFAULT_CHUNK, iter_value_chunks


def _k_mixture(q1, q2, apc, amc, apu, amu, p1, p2, beta, counterfactual):
    """K for scalar or array value states; exact eight-outcome sum."""
    pi1 = expit(beta * (q1 - q2))
    k = 0.0
    # arm 1 chosen: its reward moves q1 with the chosen-arm rates
    for rc in (0, 1):
        for ru in (0, 1):
            w = (p1 if rc else 1.0 - p1) * (p2 if ru else 1.0 - p2)
            n1 = q1 + (apc * (1.0 - q1) if rc else -(amc * q1))
            n2 = q2 + (apu * (1.0 - q2) if ru else -(amu * q2)) if counterfactual else q2
            k = k + pi1 * w * (1.0 - expit(beta * (n1 - n2)))
    # arm 2 chosen
    for rc in (0, 1):
        for ru in (0, 1):
            w = (p2 if rc else 1.0 - p2) * (p1 if ru else 1.0 - p1)
            n2 = q2 + (apc * (1.0 - q2) if rc else -(amc * q2))
            n1 = q1 + (apu * (1.0 - q1) if ru else -(amu * q1)) if counterfactual else q1
            k = k + (1.0 - pi1) * w * expit(beta * (n1 - n2))
    return k


def switch_prob(q: QState, rates: LearningRateSet, p1: float, p2: float,
                beta: float, t: int = 0, counterfactual: bool = True) -> float:
    """Probability that the next action differs from the current one.

    Marginalises over the action taken at the state q and both arms'
    rewards; ``t`` selects scheduled rates when present.
    """
    apc, amc, apu, amu = rates.at(t)
    return float(_k_mixture(q.q1, q.q2, apc, amc, apu, amu, p1, p2,
                            beta, counterfactual))


@dataclass
class SwitchRateSeries:
    """Ensemble-average switching per trial, by two estimators.

    ``analytic`` averages the exact per-state K over replicas (lower
    variance); ``empirical`` counts realized switches between
    consecutive actions of the same replicas.
    """

    t: np.ndarray
    analytic_mean: np.ndarray
    analytic_se: np.ndarray
    empirical_mean: np.ndarray
    empirical_se: np.ndarray
    n_replicas: int


def ensemble_switch_rate(agent, env: Environment, n_replicas: int, seed: int,
                         horizon: Optional[int] = None, beta: Optional[float] = None,
                         chunk_size: int = DEFAULT_CHUNK) -> SwitchRateSeries:
    """<K>_t for t = 0..horizon-1 from n_replicas simulated trajectories.

    Simulates one extra trial so the realized-switch estimator covers the
    same trials as the analytic one.  ``beta`` overrides the agent's
    softmax temperature.
    """
    horizon = env.horizon if horizon is None else horizon
    if beta is not None:
        policy = Policy(beta=beta, mode=agent.policy.mode)
        agent = (QAgentSpec(agent.rates, policy, agent.q_init)
                 if isinstance(agent, QAgentSpec) else BayesAgentSpec(policy))
    if isinstance(agent, QAgentSpec):
        rates = agent.rates
    elif isinstance(agent, BayesAgentSpec):
        rates = LearningRateSet.bayes()  # counterfactual-mode equivalence
    else:
        raise TypeError(f"unknown agent spec {type(agent).__name__}")
    if agent.policy.mode != "softmax":
        raise ValueError("switching series is defined for softmax policies")
    b = agent.policy.beta

    k_sum = np.zeros(horizon)
    k_sqsum = np.zeros(horizon)
    switches = np.zeros(horizon)
    for chunk in iter_value_chunks(agent, env, n_replicas, seed, horizon + 1, chunk_size):
        for t in range(horizon):
            apc, amc, apu, amu = rates.at(t)
            if not env.counterfactual:
                apu = amu = 0.0
            k = _k_mixture(chunk.q1[:, t], chunk.q2[:, t], apc, amc, apu, amu,
                           env.p1, env.p2, b, env.counterfactual)
            k_sum[t] += k.sum()
            k_sqsum[t] += (k * k).sum()
        switches += (chunk.actions[:, 1:] != chunk.actions[:, :-1]).sum(axis=0)

    n = n_replicas
    a_mean = k_sum / n
    a_var = np.maximum(k_sqsum - k_sum * k_sum / n, 0.0) / max(n - 1, 1)
    a_se = np.sqrt(a_var / n)
    e_mean = switches / n
    e_se = np.sqrt(e_mean * (1.0 - e_mean) / n)
    return SwitchRateSeries(np.arange(horizon), a_mean, a_se, e_mean, e_se, n)


@dataclass
class MinSwitchPoint:
    alpha1: float
    tau_c: int
    k_min: float
    t_min: int


def min_switch_vs_taucut(alpha1_grid, alpha2: float, taucut_grid, p: float,
                         beta: float, n_replicas: int, seed: int,
                         horizon: int, chunk_size: int = DEFAULT_CHUNK) -> list[MinSwitchPoint]:
    """Minimum of the analytic <K>_t over t for each (alpha1, tau_c) cell.

    All cells share the replica streams (common random numbers), which
    smooths comparisons across the grid.
    """
    env = Environment(p1=p, p2=p, counterfactual=True, horizon=horizon)
    out = []
    for alpha1 in alpha1_grid:
        for tau_c in taucut_grid:
            sched = None if alpha1 == alpha2 else StepSchedule(alpha1, alpha2, int(tau_c))
            rates = LearningRateSet.constant(alpha1, schedule=sched)
            agent = QAgentSpec(rates, Policy(beta=beta))
            series = ensemble_switch_rate(agent, env, n_replicas, seed,
                                          chunk_size=chunk_size)
            i = int(np.argmin(series.analytic_mean))
            out.append(MinSwitchPoint(float(alpha1), int(tau_c),
                                      float(series.analytic_mean[i]), i))
    return out
