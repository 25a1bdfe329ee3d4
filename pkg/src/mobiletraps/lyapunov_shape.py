"""
Point-to-point passage functions and subadditivity diagnostics.

The passage function is ``a(s, t, x, y) = -log e(s, t, x, y)`` where
``e`` is the Feynman-Kac weight of walks from ``(s, x)`` that sit at ``y``
at time ``t``. It is computed by the forward PAM solver with unit mass at
``x``; by the Markov property it satisfies the triangle inequality
``a(t1, t3, x1, x3) <= a(t1, t2, x1, x2) + a(t2, t3, x2, x3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lattice_kernels import ModelParams, as_point
from .survival_mc import pam_solve
from .trap_field import TrapFieldRealization
from .volterra_annealed import pinned_exponent_curve

# relative floor on the reported solver tolerance (rounding in the log)
TOL_FLOOR = 1e-10


@dataclass(frozen=True)
class PassageSample:
    s: float
    t: float
    x: tuple
    y: tuple
    value: float              # a(s, t, x, y); +inf when the mass at y underflowed
    solver_tolerance: float   # |a(h) - a(h/2)| plus a rounding floor
    boundary_loss_bound: float
    infinite: bool
    field_ref: dict

    @property
    def weight(self) -> float:
        return math.exp(-self.value)


def _field_ref(field):
    return {"seed": field.config.seed, "stream": field.stream}


def _passage_once(field, params, s, t, x, y, box, h):
    g = pam_solve(field, params, t - s, box, h, initial=_delta(x, box, params.d), time_order="forward", t0=s)
    return -g.log_at(y), g.boundary_loss_bound


def _delta(x, box, d):
    u = np.zeros((2 * box + 1,) * d)
    idx = tuple(int(c) + box for c in x)
    u[idx] = 1.0
    return u


def passage(field: TrapFieldRealization, params: ModelParams | None, s: float, t: float, x, y,
            box_radius: int, h: float) -> PassageSample:
    """``a(s, t, x, y)`` with a step-halving error estimate.

    The reported value is the one computed with step ``h/2``.
    """
    params = field.params if params is None else params
    d = params.d
    x, y = tuple(as_point(x, d).tolist()), tuple(as_point(y, d).tolist())
    if t < s:
        raise ValueError("need s <= t")
    if max(map(abs, x + y)) > box_radius:
        raise ValueError("x and y must lie in the box")
    if t == s:
        value = 0.0 if x == y else math.inf
        return PassageSample(s, t, x, y, value, 0.0, 0.0, x != y, _field_ref(field))
    a_h, loss = _passage_once(field, params, s, t, x, y, box_radius, h)
    a_f, _ = _passage_once(field, params, s, t, x, y, box_radius, h / 2)
    if not (math.isfinite(a_h) and math.isfinite(a_f)):
        return PassageSample(s, t, x, y, math.inf, math.inf, loss, True, _field_ref(field))
    tol = abs(a_h - a_f) + TOL_FLOOR * max(1.0, abs(a_f))
    return PassageSample(s, t, x, y, float(a_f), float(tol), float(loss), False, _field_ref(field))


def passage_rates(field: TrapFieldRealization, params: ModelParams | None, horizons, box_radius: int,
                  h: float) -> np.ndarray:
    """``a(0, t, 0, 0) / t`` at each horizon from one forward solve."""
    params = field.params if params is None else params
    horizons = np.asarray(horizons, dtype=float)
    T = float(horizons[-1])
    N = int(math.ceil(T / h - 1e-9))
    g = pam_solve(field, params, T, box_radius, T / N, initial="delta", record_times=horizons)
    origin = (0,) * params.d
    return np.array([-g.log_at(origin, k) / t for k, t in enumerate(horizons)])


class TriangleMargin(NamedTuple):
    margin: float       # RHS - LHS
    tolerance: float    # sum of the three solver tolerances
    holds: bool
    lhs: PassageSample
    first: PassageSample
    second: PassageSample


def triangle_check(field: TrapFieldRealization, params: ModelParams | None, t1: float, t2: float,
                   t3: float, x1, x2, x3, box_radius: int, h: float) -> TriangleMargin:
    """Margin ``a(t1,t2,x1,x2) + a(t2,t3,x2,x3) - a(t1,t3,x1,x3)``.

    The times should be multiples of ``h`` so that all three solves use
    the same time steps; then the discrete weights obey the inequality up
    to rounding. A zero-length leg has ``a = -log 1{x = y}``.
    """
    if not t1 <= t2 <= t3:
        raise ValueError("times must be ordered")
    lhs = passage(field, params, t1, t3, x1, x3, box_radius, h)
    a = passage(field, params, t1, t2, x1, x2, box_radius, h)
    b = passage(field, params, t2, t3, x2, x3, box_radius, h)
    rhs = a.value + b.value
    margin = math.inf if math.isinf(rhs) else rhs - lhs.value
    tol = lhs.solver_tolerance + a.solver_tolerance + b.solver_tolerance
    return TriangleMargin(margin, tol, bool(margin >= -5 * tol), lhs, a, b)


@dataclass(frozen=True)
class ShapeProfile:
    t: float
    speeds: np.ndarray
    targets: np.ndarray
    values: np.ndarray          # a(0, t, 0, target) / t
    convexity_residuals: np.ndarray  # f(v-) + f(v+) - 2 f(v) at interior speeds


def shape_profile(field: TrapFieldRealization, params: ModelParams | None, t: float, speeds,
                  box_radius: int, h: float) -> ShapeProfile:
    """``t^{-1} a(0, t, 0, round(v t) e_1)`` over a list of speeds, from one solve.

    Midpoint convexity residuals are reported for consecutive triples of
    speeds (meaningful when the speeds are equally spaced).
    """
    params = field.params if params is None else params
    d = params.d
    speeds = np.asarray(speeds, dtype=float)
    targets = np.rint(speeds * t).astype(np.int64)
    if np.any(np.abs(targets) > box_radius):
        raise ValueError("speeds reach outside the box")
    g = pam_solve(field, params, t, box_radius, h, initial="delta")
    vals = []
    for k in targets:
        y = np.zeros(d, np.int64)
        y[0] = k
        vals.append(-g.log_at(y) / t)
    vals = np.array(vals)
    res = vals[:-2] + vals[2:] - 2 * vals[1:-1] if vals.size >= 3 else np.zeros(0)
    return ShapeProfile(float(t), speeds, targets, vals, res)


class SubadditivityMargin(NamedTuple):
    t1: float
    t2: float
    margin: float  # f(t1) + f(t2) - f(t1 + t2), f = -log E[Z]
    slack: float
    holds: bool


def subadditivity_annealed_check(params: ModelParams, t1s, t2s, h: float = 0.01) -> list:
    """Subadditivity of ``f(t) = -log E[Z_t]`` for the pinned walker.

    Values come from the exact Volterra pipeline; the slack is three times
    the step-halving error estimate of the three values involved.
    """
    if params.kappa != 0:
        raise ValueError("exact annealed values need kappa = 0")
    ts = sorted({float(a) for a in t1s} | {float(b) for b in t2s} | {float(a + b) for a in t1s for b in t2s})
    grid = np.array([t for t in ts if t > 0])
    if grid.size == 0:
        return [SubadditivityMargin(a, b, 0.0, TOL_FLOOR, True) for a in t1s for b in t2s]
    coarse = pinned_exponent_curve(grid, h, params)
    fine = pinned_exponent_curve(grid, h / 2, params)
    f = {0.0: 0.0}
    err = {0.0: 0.0}
    for t, c, v in zip(grid, coarse, fine):
        f[float(t)] = float(v)
        err[float(t)] = abs(v - c) / 3
    out = []
    for a in t1s:
        for b in t2s:
            a, b = float(a), float(b)
            m = f[a] + f[b] - f[a + b]
            slack = 3 * (err[a] + err[b] + err[a + b]) + TOL_FLOOR * max(1.0, f[a + b])
            out.append(SubadditivityMargin(a, b, m, slack, bool(m >= -slack)))
    return out
