"""Finite-horizon Bayes-optimal planning over beta-posterior beliefs.

Without counterfactual feedback, exploration has value, and the optimal
policy solves a Bellman recursion over the reachable belief states: at
trial t these are the count tuples (a1, b1, a2, b2) summing to t, a shell
of C(t+3, 3) states.  Backward induction from V = 0 at the horizon fills
a value and policy table shell by shell.

With counterfactual feedback both posteriors update regardless of the
action, so the future term of the Bellman equation is action-independent
and the optimal policy collapses to the greedy posterior-mean rule; no
table is built in that mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .agents import BeliefState, bayes_greedy_action

# Conservative cap on the value + policy tables; horizons around 200
# (the intended maximum) stay well below it.
DEFAULT_MEMORY_LIMIT_BYTES = 2 * 1024**3


class PlannerResourceError(Exception):
    """Raised when the belief table for the requested horizon would not fit."""


def _comb3(n):
    """C(n, 3) for scalar or array n, zero when n < 3."""
    n = np.asarray(n, dtype=np.int64)
    out = n * (n - 1) * (n - 2) // 6
    return np.where(n >= 3, out, 0)


def shell_size(t: int) -> int:
    """Number of belief states with counts summing to t."""
    return int(_comb3(t + 3))


def shell_states(t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """All (a1, b1, a2, b2) with sum t, in lexicographic order of (a1, b1, a2)."""
    a1p = np.repeat(np.arange(t + 1), np.arange(t + 1, 0, -1))
    b1p = np.concatenate([np.arange(t - a + 1) for a in range(t + 1)]) if t >= 0 else np.empty(0, int)
    counts = t - a1p - b1p + 1
    n = int(counts.sum())
    a1 = np.repeat(a1p, counts)
    b1 = np.repeat(b1p, counts)
    starts = np.cumsum(counts) - counts
    a2 = np.arange(n) - np.repeat(starts, counts)
    b2 = t - a1 - b1 - a2
    return a1, b1, a2, b2


def shell_rank(a1, b1, a2, t: int):
    """Index of (a1, b1, a2, ·) within the lexicographic order of shell t."""
    a1 = np.asarray(a1, dtype=np.int64)
    b1 = np.asarray(b1, dtype=np.int64)
    a2 = np.asarray(a2, dtype=np.int64)
    base = _comb3(t + 3) - _comb3(t - a1 + 3)
    return base + b1 * (t - a1 + 1) - b1 * (b1 - 1) // 2 + a2


@dataclass
class BayesOptimalPlan:
    """Backward-induction solution: per-shell value and action tables.

    ``action(b, t)`` and ``value(b, t)`` index by the belief's shell rank.
    For counterfactual feedback no tables exist and ``action`` delegates
    to the greedy rule.
    """

    horizon: int
    counterfactual: bool
    values: Optional[list[np.ndarray]] = None
    actions: Optional[list[np.ndarray]] = None

    def _check(self, b: BeliefState, t: int):
        if not (0 <= t <= self.horizon):
            raise ValueError(f"t={t} outside plan horizon {self.horizon}")
        if b.a1 + b.b1 + b.a2 + b.b2 != t:
            raise ValueError(f"belief {tuple(b)} is not reachable at trial {t}")

    def action(self, b: BeliefState, t: int) -> int:
        if self.counterfactual:
            return bayes_greedy_action(b)
        self._check(b, t)
        if t == self.horizon:
            return bayes_greedy_action(b)  # no future; any convention works
        r = int(shell_rank(b.a1, b.b1, b.a2, t))
        return int(self.actions[t][r])

    def value(self, b: BeliefState, t: int) -> float:
        if self.counterfactual:
            raise ValueError("value table is not built in counterfactual mode "
                             "(the policy reduces to the greedy rule)")
        self._check(b, t)
        r = int(shell_rank(b.a1, b.b1, b.a2, t))
        return float(self.values[t][r])


def bayes_optimal_plan(horizon: int, counterfactual: bool = False,
                       memory_limit_bytes: int = DEFAULT_MEMORY_LIMIT_BYTES) -> BayesOptimalPlan:
    """Solve the finite-horizon bandit planning problem over beliefs.

    Returns a plan whose ``action``/``value`` accessors cover every belief
    reachable within the horizon.  Raises :class:`PlannerResourceError`
    when the tables would exceed ``memory_limit_bytes``.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if counterfactual:
        return BayesOptimalPlan(horizon=horizon, counterfactual=True)

    total_states = sum(shell_size(t) for t in range(horizon + 1))
    need = total_states * (8 + 1)  # float64 value + int8 action per state
    if need > memory_limit_bytes:
        raise PlannerResourceError(
            f"horizon {horizon} needs ~{need / 1e9:.1f} GB of belief tables "
            f"(limit {memory_limit_bytes / 1e9:.1f} GB)")

    values: list[Optional[np.ndarray]] = [None] * (horizon + 1)
    actions: list[Optional[np.ndarray]] = [None] * (horizon + 1)
    values[horizon] = np.zeros(shell_size(horizon))
    actions[horizon] = np.ones(shell_size(horizon), dtype=np.int8)

    for t in range(horizon - 1, -1, -1):
        a1, b1, a2, b2 = shell_states(t)
        v_next = values[t + 1]
        p1 = (a1 + 1.0) / (a1 + b1 + 2.0)
        p2 = (a2 + 1.0) / (a2 + b2 + 2.0)
        q1 = p1 * (1.0 + v_next[shell_rank(a1 + 1, b1, a2, t + 1)]) \
            + (1.0 - p1) * v_next[shell_rank(a1, b1 + 1, a2, t + 1)]
        q2 = p2 * (1.0 + v_next[shell_rank(a1, b1, a2 + 1, t + 1)]) \
            + (1.0 - p2) * v_next[shell_rank(a1, b1, a2, t + 1)]
        values[t] = np.maximum(q1, q2)
        actions[t] = np.where(q1 >= q2, 1, 2).astype(np.int8)  # tie -> arm 1

    return BayesOptimalPlan(horizon=horizon, counterfactual=False,
                            values=values, actions=actions)
