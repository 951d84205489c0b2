"""Learning agents for the two-armed bandit: asymmetric Q-learners and Bayesian agents.

The Q-learner updates each arm's value by a prediction-error rule with
separate rates for positive/negative errors on the chosen/unchosen arm.
The Bayesian agent keeps beta-posterior counts per arm and acts on the
posterior means.  With full feedback the Bayesian posterior-mean update
is exactly a symmetric Q-update with the time-decaying rate 1/(t+3),
which is what :func:`effective_rate` returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.special import expit

from .env import Environment, RewardPair, RngStream, sample_rewards


class QState(NamedTuple):
    q1: float
    q2: float


class BeliefState(NamedTuple):
    """Success/failure counts of the beta posterior for each arm."""

    a1: int
    b1: int
    a2: int
    b2: int


@dataclass(frozen=True)
class StepSchedule:
    """Replace all four learning rates by ``alpha1`` before ``tau_c`` and ``alpha2`` after."""

    alpha1: float
    alpha2: float
    tau_c: int

    def rate(self, t: int) -> float:
        return self.alpha1 if t < self.tau_c else self.alpha2


@dataclass(frozen=True)
class BayesSchedule:
    """Replace all four learning rates by the posterior-mean rate 1/(t+3)."""

    def rate(self, t: int) -> float:
        return 1.0 / (t + 3.0)


Schedule = Union[StepSchedule, BayesSchedule, "Callable[[int], float]", None]


@dataclass(frozen=True)
class LearningRateSet:
    """The four prediction-error rates plus an optional time schedule.

    ``a_plus_c``/``a_minus_c`` apply to positive/negative errors on the
    chosen arm, ``a_plus_u``/``a_minus_u`` to the unchosen arm.  A schedule,
    when present, replaces all four rates by a single time-dependent value.
    """

    a_plus_c: float
    a_minus_c: float
    a_plus_u: float
    a_minus_u: float
    schedule: Schedule = None

    def __post_init__(self):
        for name in ("a_plus_c", "a_minus_c", "a_plus_u", "a_minus_u"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @classmethod
    def constant(cls, alpha: float, schedule: Schedule = None) -> "LearningRateSet":
        """Unbiased set with all four rates equal."""
        return cls(alpha, alpha, alpha, alpha, schedule=schedule)

    @classmethod
    def bayes(cls) -> "LearningRateSet":
        """Unbiased set following the posterior-mean rate 1/(t+3)."""
        a0 = 1.0 / 3.0
        return cls(a0, a0, a0, a0, schedule=BayesSchedule())

    @classmethod
    def confirmation(cls, a_confirm: float, a_disconfirm: float) -> "LearningRateSet":
        """Two-rate set with a_plus_c = a_minus_u and a_minus_c = a_plus_u."""
        return cls(a_confirm, a_disconfirm, a_disconfirm, a_confirm)

    def at(self, t: int) -> tuple[float, float, float, float]:
        """Effective (a_plus_c, a_minus_c, a_plus_u, a_minus_u) at trial t."""
        if self.schedule is None:
            return (self.a_plus_c, self.a_minus_c, self.a_plus_u, self.a_minus_u)
        # a bare callable t -> rate is accepted as a replacement schedule
        a = self.schedule(t) if callable(self.schedule) else self.schedule.rate(t)
        if not (0.0 <= a <= 1.0):
            raise ValueError(f"schedule produced out-of-range rate {a} at t={t}")
        return (a, a, a, a)

    @property
    def unchosen_zero(self) -> bool:
        return self.a_plus_u == 0.0 and self.a_minus_u == 0.0


@dataclass(frozen=True)
class Policy:
    """Action-selection rule: softmax with inverse temperature beta, or greedy argmax."""

    beta: float = 1.0
    mode: str = "softmax"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.mode not in ("softmax", "greedy"):
            raise ValueError(f"unknown policy mode {self.mode!r}")


def softmax_policy(q: QState, policy: Policy) -> float:
    """Probability of choosing arm 1 given the current values.

    Softmax mode returns 1/(1+exp(-beta*(q1-q2))); greedy mode returns the
    indicator of the larger value with ties broken toward arm 1.
    """
    if policy.mode == "greedy":
        return 1.0 if q.q1 >= q.q2 else 0.0
    # expit keeps the scalar path bit-identical to the vectorized engine
    return float(expit(policy.beta * (q.q1 - q.q2)))


def q_update(q: QState, chosen: int, rewards: RewardPair, rates: LearningRateSet,
             t: int = 0, counterfactual: bool = True) -> QState:
    """One prediction-error update of both values.

    The chosen arm moves toward its reward with the positive/negative
    chosen-arm rate; with counterfactual feedback the unchosen arm does the
    same with the unchosen-arm rates.  Zero prediction error leaves the
    value unchanged.
    """
    apc, amc, apu, amu = rates.at(t)
    q1, q2 = q
    if chosen == 1:
        e = rewards.r1 - q1
        q1 += (apc if e > 0 else amc) * e
        if counterfactual:
            e = rewards.r2 - q2
            q2 += (apu if e > 0 else amu) * e
    elif chosen == 2:
        e = rewards.r2 - q2
        q2 += (apc if e > 0 else amc) * e
        if counterfactual:
            e = rewards.r1 - q1
            q1 += (apu if e > 0 else amu) * e
    else:
        raise ValueError(f"chosen must be 1 or 2, got {chosen}")
    return QState(q1, q2)


def belief_update(b: BeliefState, chosen: int, rewards: RewardPair,
                  counterfactual: bool = True) -> BeliefState:
    """Increment the observed arms' success/failure counts."""
    if chosen not in (1, 2):
        raise ValueError(f"chosen must be 1 or 2, got {chosen}")
    a1, b1, a2, b2 = b
    if chosen == 1 or counterfactual:
        if rewards.r1:
            a1 += 1
        else:
            b1 += 1
    if chosen == 2 or counterfactual:
        if rewards.r2:
            a2 += 1
        else:
            b2 += 1
    return BeliefState(a1, b1, a2, b2)


def posterior_mean(b: BeliefState, arm: int) -> float:
    """Mean of the beta posterior for one arm under a uniform prior."""
    if arm == 1:
        return (b.a1 + 1.0) / (b.a1 + b.b1 + 2.0)
    if arm == 2:
        return (b.a2 + 1.0) / (b.a2 + b.b2 + 2.0)
    raise ValueError(f"arm must be 1 or 2, got {arm}")


def posterior_means(b: BeliefState) -> QState:
    return QState(posterior_mean(b, 1), posterior_mean(b, 2))


def effective_rate(t: int) -> float:
    """Learning rate at which posterior-mean updating matches a Q-update.

    Valid when both arms observe one outcome per trial, so each arm's count
    total equals t.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    return 1.0 / (t + 3.0)


def effective_rate_from_counts(successes: int, failures: int) -> float:
    """Per-arm variant for partial feedback: 1 / (pulls + 3)."""
    if successes < 0 or failures < 0:
        raise ValueError("counts must be nonnegative")
    return 1.0 / (successes + failures + 3.0)


def bayes_greedy_action(b: BeliefState, policy: Optional[Policy] = None):
    """Action rule over the posterior means.

    With no policy (or a greedy one) returns the arm with the larger
    posterior mean, ties to arm 1.  With a softmax policy returns the
    probability of choosing arm 1 instead of a hard decision.
    """
    if policy is not None and policy.mode == "softmax":
        return softmax_policy(posterior_means(b), policy)
    return 1 if posterior_mean(b, 1) >= posterior_mean(b, 2) else 2


def bayes_choice_prob(b: BeliefState, policy: Policy) -> float:
    """Probability of choosing arm 1 when acting on the posterior means."""
    return softmax_policy(posterior_means(b), policy)


@dataclass(frozen=True)
class QAgentSpec:
    """A Q-learning agent: rate set, decision policy, and initial values."""

    rates: LearningRateSet
    policy: Policy
    q_init: tuple[float, float] = (0.5, 0.5)


@dataclass(frozen=True)
class BayesAgentSpec:
    """A Bayesian agent acting on posterior means through the given policy."""

    policy: Policy


AgentSpec = Union[QAgentSpec, BayesAgentSpec]


@dataclass
class Trajectory:
    """One agent's full pass through a bandit task.

    ``values1``/``values2`` hold the agent's value estimates before each
    trial plus the terminal state (length T+1): Q-values for a Q-agent,
    posterior means for a Bayesian agent.  ``beliefs`` additionally records
    the posterior counts for Bayesian agents.
    """

    actions: np.ndarray
    rewards1: np.ndarray
    rewards2: np.ndarray
    counterfactual: bool
    values1: np.ndarray
    values2: np.ndarray
    beliefs: Optional[np.ndarray] = None

    @property
    def n_trials(self) -> int:
        return len(self.actions)

    def reward_chosen(self) -> np.ndarray:
        return np.where(self.actions == 1, self.rewards1, self.rewards2)

    def reward_unchosen(self) -> np.ndarray:
        return np.where(self.actions == 1, self.rewards2, self.rewards1)

    def csv_rows(self, replica: int = 0) -> list[tuple]:
        """Rows (replica, t, action, r_chosen, r_unchosen, v1, v2); the
        unchosen reward is blank when feedback hides it."""
        rc = self.reward_chosen()
        ru = self.reward_unchosen()
        rows = []
        for t in range(self.n_trials):
            hidden = "" if not self.counterfactual else int(ru[t])
            rows.append((replica, t, int(self.actions[t]), int(rc[t]), hidden,
                         float(self.values1[t]), float(self.values2[t])))
        return rows


def _choose(p1: float, u: float) -> int:
    return 1 if u < p1 else 2


def run_trajectory(agent: AgentSpec, env: Environment, rng: RngStream) -> Trajectory:
    """Simulate one full episode, deterministic given the stream.

    Each trial consumes exactly three uniforms (action, arm-1 reward,
    arm-2 reward) whether or not the policy is stochastic, so trajectories
    are comparable across agents and feedback conditions under shared
    randomness.
    """
    T = env.horizon
    actions = np.empty(T, dtype=np.int8)
    r1s = np.empty(T, dtype=np.int8)
    r2s = np.empty(T, dtype=np.int8)
    v1 = np.empty(T + 1)
    v2 = np.empty(T + 1)

    if isinstance(agent, QAgentSpec):
        if not env.counterfactual and not agent.rates.unchosen_zero and agent.rates.schedule is None:
            raise ValueError("unchosen-arm rates must be zero without counterfactual feedback")
        q = QState(*agent.q_init)
        v1[0], v2[0] = q
        for t in range(T):
            u = rng.uniform()
            p1 = softmax_policy(q, agent.policy)
            a = _choose(p1, u) if agent.policy.mode == "softmax" else (1 if p1 >= 0.5 else 2)
            rewards = sample_rewards(env, rng)
            q = q_update(q, a, rewards, agent.rates, t=t, counterfactual=env.counterfactual)
            actions[t], r1s[t], r2s[t] = a, rewards.r1, rewards.r2
            v1[t + 1], v2[t + 1] = q
        return Trajectory(actions, r1s, r2s, env.counterfactual, v1, v2)

    if isinstance(agent, BayesAgentSpec):
        beliefs = np.empty((T + 1, 4), dtype=np.int64)
        b = BeliefState(0, 0, 0, 0)
        beliefs[0] = b
        v1[0], v2[0] = posterior_means(b)
        for t in range(T):
            u = rng.uniform()
            p1 = bayes_choice_prob(b, agent.policy)
            a = _choose(p1, u) if agent.policy.mode == "softmax" else (1 if p1 >= 0.5 else 2)
            rewards = sample_rewards(env, rng)
            b = belief_update(b, a, rewards, counterfactual=env.counterfactual)
            actions[t], r1s[t], r2s[t] = a, rewards.r1, rewards.r2
            beliefs[t + 1] = b
            v1[t + 1], v2[t + 1] = posterior_means(b)
        return Trajectory(actions, r1s, r2s, env.counterfactual, v1, v2, beliefs=beliefs)

    raise TypeError(f"unknown agent spec {type(agent).__name__}")
