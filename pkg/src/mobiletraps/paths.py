"""Piecewise-constant lattice trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice_kernels import as_point


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Right-continuous path on ``[0, horizon]``: at ``start`` until the first
    jump time, then displaced by ``steps[i]`` at ``jump_times[i]``."""

    start: np.ndarray
    jump_times: np.ndarray
    steps: np.ndarray
    horizon: float

    def __post_init__(self):
        start = as_point(self.start)
        jt = np.asarray(self.jump_times, dtype=float).reshape(-1)
        steps = np.asarray(self.steps, dtype=np.int64).reshape(jt.size, start.size)
        if np.any(np.diff(jt) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if jt.size and (jt[0] <= 0 or jt[-1] > self.horizon):
            raise ValueError("jump times must lie in (0, horizon]")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def constant(cls, point, horizon: float) -> "WalkPath":
        p = as_point(point)
        return cls(p, np.zeros(0), np.zeros((0, p.size), np.int64), horizon)

    @classmethod
    def from_positions(cls, times, positions, horizon: float) -> "WalkPath":
        """Path at ``positions[0]`` until ``times[0]``, then ``positions[i+1]``."""
        positions = np.asarray(positions, dtype=np.int64)
        return cls(positions[0], times, np.diff(positions, axis=0), horizon)

    @property
    def d(self) -> int:
        return self.start.size

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    @cached_property
    def positions(self) -> np.ndarray:
        """Positions ``(n_jumps + 1, d)``: before the first jump, after each."""
        return np.vstack([self.start, self.start + np.cumsum(self.steps, axis=0)])

    def position_at(self, t: float) -> np.ndarray:
        return self.positions[np.searchsorted(self.jump_times, t, side="right")]

    def events_on(self, t0: float, t1: float):
        """Jump times strictly inside ``(t0, t1)`` and the positions occupied
        on ``[t0, t1)``, first entry being ``X(t0)``."""
        i0 = np.searchsorted(self.jump_times, t0, side="right")
        i1 = np.searchsorted(self.jump_times, t1, side="left")
        return self.jump_times[i0:i1], self.positions[i0:i1 + 1]

    def max_distance(self) -> int:
        return int(np.max(np.abs(self.positions)))

    def shifted(self, t0: float) -> "WalkPath":
        """Increments after ``t0``: ``s -> X(t0 + s) - X(t0)`` on ``[0, horizon - t0]``."""
        times, pos = self.events_on(t0, self.horizon + 1.0)
        return WalkPath.from_positions(times - t0, pos - pos[0], self.horizon - t0)

    def reversed(self) -> "WalkPath":
        """``s -> X(horizon - s)`` (up to values at the jump instants)."""
        T = self.horizon
        times = T - self.jump_times[::-1]
        pos = self.positions[::-1]
        if times.size and times[0] <= 0:  # jump exactly at the horizon
            times, pos = times[1:], pos[1:]
        return WalkPath.from_positions(times, pos, T)
