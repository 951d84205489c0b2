"""Per-subject trial records and their CSV round-trip.

A session is what a fitting procedure sees: the chosen actions, the
rewards the subject observed, and — when the task reveals it — the
reward of the unchosen arm.  The CSV schema is one row per trial with
columns ``subject_id, trial, action, r_chosen, r_unchosen``; the last
column is left empty for subjects whose task hid it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .agents import AgentSpec, Trajectory, run_trajectory
from .env import Environment, RngStream

CSV_HEADER = ["subject_id", "trial", "action", "r_chosen", "r_unchosen"]


@dataclass
class SessionData:
    subject_id: str
    actions: np.ndarray
    r_chosen: np.ndarray
    r_unchosen: Optional[np.ndarray]
    counterfactual: bool

    @property
    def n_trials(self) -> int:
        return len(self.actions)

    def validate(self) -> None:
        n = self.n_trials
        if n == 0:
            raise ValueError(f"session {self.subject_id!r} has no trials")
        if not np.isin(self.actions, (1, 2)).all():
            raise ValueError(f"session {self.subject_id!r} has actions outside {{1, 2}}")
        if not np.isin(self.r_chosen, (0, 1)).all():
            raise ValueError(f"session {self.subject_id!r} has non-binary rewards")
        if self.counterfactual:
            if self.r_unchosen is None or len(self.r_unchosen) != n:
                raise ValueError(f"session {self.subject_id!r} lacks unchosen rewards "
                                 "despite counterfactual feedback")
            if not np.isin(self.r_unchosen, (0, 1)).all():
                raise ValueError(f"session {self.subject_id!r} has non-binary rewards")
        elif self.r_unchosen is not None:
            raise ValueError(f"session {self.subject_id!r} records unchosen rewards "
                             "although feedback hides them")


def session_from_trajectory(traj: Trajectory, subject_id: str) -> SessionData:
    ru = traj.reward_unchosen().astype(np.int8) if traj.counterfactual else None
    return SessionData(subject_id=subject_id,
                       actions=traj.actions.copy(),
                       r_chosen=traj.reward_chosen().astype(np.int8),
                       r_unchosen=ru,
                       counterfactual=traj.counterfactual)


def synthesize_sessions(agent: AgentSpec, env: Environment, n_subjects: int,
                        seed: int, prefix: str = "S") -> list[SessionData]:
    """Simulate one session per subject; subject i owns stream (seed, i)."""
    out = []
    for i in range(n_subjects):
        traj = run_trajectory(agent, env, RngStream(seed, i))
        out.append(session_from_trajectory(traj, f"{prefix}{i:04d}"))
    return out


def write_sessions(path, sessions: list[SessionData], seed=None) -> int:
    """Write sessions to CSV; returns the number of data rows.

    When `seed` is given it is recorded as a leading comment line, which
    `read_sessions` skips.
    """
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s in sessions:
            s.validate()
            for t in range(s.n_trials):
                ru = int(s.r_unchosen[t]) if s.counterfactual else ""
                w.writerow([s.subject_id, t, int(s.actions[t]), int(s.r_chosen[t]), ru])
                rows += 1
    return rows


def read_sessions(path) -> list[SessionData]:
    """Read sessions back, in file order; lines starting with '#' are skipped.

    Enforces the header, contiguous trial indices from 0 within each
    subject, and an all-or-nothing unchosen-reward column per subject.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER}, got {header}")
    order: list[str] = []
    by_subject: dict[str, list[tuple[int, int, int, Optional[int]]]] = {}
    for ln, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise ValueError(f"line {ln}: expected 5 columns, got {len(row)}")
        sid, trial, action, rc, ru = row
        if sid not in by_subject:
            by_subject[sid] = []
            order.append(sid)
        by_subject[sid].append((int(trial), int(action), int(rc),
                                int(ru) if ru != "" else None))
    out = []
    for sid in order:
        recs = by_subject[sid]
        trials = [r[0] for r in recs]
        if trials != list(range(len(recs))):
            raise ValueError(f"subject {sid!r}: trial indices must run 0..{len(recs) - 1}")
        hidden = [r[3] is None for r in recs]
        if any(hidden) and not all(hidden):
            raise ValueError(f"subject {sid!r}: unchosen rewards must be all present "
                             "or all absent")
        counterfactual = not hidden[0]
        ru_arr = (np.array([r[3] for r in recs], dtype=np.int8)
                  if counterfactual else None)
        s = SessionData(subject_id=sid,
                        actions=np.array([r[1] for r in recs], dtype=np.int8),
                        r_chosen=np.array([r[2] for r in recs], dtype=np.int8),
                        r_unchosen=ru_arr,
                        counterfactual=counterfactual)
        s.validate()
        out.append(s)
    return out
