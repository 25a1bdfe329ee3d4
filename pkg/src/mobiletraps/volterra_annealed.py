"""
Deterministic annealed survival computations.

After integrating out the Poisson traps, the annealed survival of a fixed
walker path ``X`` is ``exp(-nu gamma int_0^t m(s) ds)`` where
``m(s) = v_X(s, X(s))`` solves the scalar second-kind Volterra equation::

    m(t) = 1 - gamma int_0^t p_{rho (t-s)}(X(t) - X(s)) m(s) ds

The pinned walker (``X = 0``) gives a convolution equation. Hard traps
(``gamma = inf``) use the non-hitting probability of the origin instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from . import kernels
from .lattice_kernels import (ModelParams, certified_radius, exit_probability_bound,
                              green_function, transition_prob)
from .paths import WalkPath


class CertificationError(RuntimeError):
    """A truncated domain cannot meet the requested error budget."""

    def __init__(self, message, suggested_radius=None):
        super().__init__(message)
        self.suggested_radius = suggested_radius


@dataclass(frozen=True, eq=False)
class PathSurvivalSolution:
    """Grid solution of the path-conditioned Volterra equation.

    ``m_values`` are right limits ``m(t_k)``; ``m_left`` the left limits,
    which differ only at nodes where the walker jumps.
    """

    step: float
    times: np.ndarray
    m_values: np.ndarray
    m_left: np.ndarray
    running_integral: np.ndarray
    params: ModelParams

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def exponent(self) -> float:
        """``nu * gamma * int_0^t m``, i.e. minus the log annealed survival."""
        return self.params.nu * self.params.gamma * float(self.running_integral[-1])

    def survival(self) -> np.ndarray:
        """Annealed survival at every node."""
        return np.exp(-self.params.nu * self.params.gamma * self.running_integral)

    def integral_at(self, t: float) -> float:
        """``int_0^t m`` at a node time (linear interpolation between nodes)."""
        return float(np.interp(t, self.times, self.running_integral))


def _check_finite_gamma(params, h):
    if not h > 0:
        raise ValueError("step h must be positive")
    if not math.isfinite(params.gamma):
        raise ValueError("the Volterra solvers need finite gamma; use the hitting solver for gamma=inf")


def _cumtrapz(h, y):
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * h * (y[1:] + y[:-1]), out=out[1:])
    return out


def solve_v0(t: float, h: float, params: ModelParams) -> PathSurvivalSolution:
    """Pinned solution ``v_0(s, 0)`` on ``[0, t]`` with step close to ``h``.

    Trapezoid discretisation of the convolution equation with kernel
    ``gamma p_{rho s}(0)``; second order in the step.
    """
    _check_finite_gamma(params, h)
    N = max(1, int(math.ceil(t / h - 1e-9)))
    step = t / N
    s = np.arange(N + 1) * step
    K = special.ive(0, params.rho * s / params.d) ** params.d
    m = kernels.conv_volterra(K, params.gamma * step)
    return PathSurvivalSolution(step, s, m, m, _cumtrapz(step, m), params)


def richardson_v0(t: float, h: float, params: ModelParams):
    """Solve with ``h`` and ``h/2``; return (fine solution, extrapolated
    integral at ``t``, error estimate of the fine integral)."""
    coarse = solve_v0(t, h, params)
    fine = solve_v0(t, coarse.step / 2, params)
    Ic, If = coarse.running_integral[-1], fine.running_integral[-1]
    return fine, If + (If - Ic) / 3.0, abs(If - Ic) / 3.0


def annealed_exponent_pinned(t: float, h: float, params: ModelParams) -> float:
    """``-log`` of the pinned annealed survival (no underflow for large ``t``)."""
    if t == 0:
        return 0.0
    if params.hard_traps:
        return infinite_gamma_exponent(t, params)
    return solve_v0(t, h, params).exponent


def annealed_survival_pinned(t: float, h: float, params: ModelParams) -> float:
    """Exact (``kappa = 0``) annealed survival ``exp(-nu gamma int_0^t v_0)``."""
    return math.exp(-annealed_exponent_pinned(t, h, params))


def solve_m_along_path(path: WalkPath, t: float, h: float, params: ModelParams) -> PathSurvivalSolution:
    """Solve for ``m(s) = v_X(s, X(s))`` along a given walker path.

    The node set is the uniform grid plus the path's jump times, so that the
    path is constant on every cell and the trapezoid rule keeps second
    order. At a jump node both one-sided values of ``m`` are computed.
    """
    _check_finite_gamma(params, h)
    d, rho, g = params.d, params.rho, params.gamma
    N = max(1, int(math.ceil(t / h - 1e-9)))
    grid = np.arange(N + 1) * (t / N)
    jt = path.jump_times[(path.jump_times > 0) & (path.jump_times < t)]
    far = np.min(np.abs(grid[:, None] - jt[None, :]), axis=0) > 1e-12 * max(1.0, t) if jt.size else jt
    times = np.union1d(grid, jt[far] if jt.size else jt)
    jump_nodes = np.isin(times, jt) if jt.size else np.zeros(times.size, bool)
    if jt.size:
        # nodes within rounding of a jump time are jump nodes too
        near = np.searchsorted(times, jt)
        for k, tj in zip(near, jt):
            for c in (k - 1, k, k + 1):
                if 0 < c < times.size and abs(times[c] - tj) <= 1e-12 * max(1.0, t):
                    jump_nodes[c] = True
    n_nodes = times.size
    cell = np.array([path.position_at(s) for s in times[:-1]])  # X on [t_j, t_{j+1})
    at_node = np.array([path.position_at(s) for s in times])
    dt = np.diff(times)

    mR = np.empty(n_nodes)
    mL = np.empty(n_nodes)
    mR[0] = mL[0] = 1.0
    for n in range(1, n_nodes):
        lag_l = rho * (times[n] - times[:n])
        lag_r = rho * (times[n] - times[1:n + 1])
        yL = cell[n - 1]
        disp = yL - cell[:n]
        kl = transition_prob(lag_l, disp, 1.0, d)
        kr = transition_prob(lag_r, disp, 1.0, d)
        w = 0.5 * dt[:n]
        known = np.dot(w, kl * mR[:n]) + np.dot(w[:-1], kr[:-1] * mL[1:n])
        mL[n] = (1.0 - g * known) / (1.0 + g * w[-1])
        if jump_nodes[n] and np.any(at_node[n] != yL):
            disp = at_node[n] - cell[:n]
            kl = transition_prob(lag_l, disp, 1.0, d)
            kr = transition_prob(lag_r, disp, 1.0, d)
            mR[n] = 1.0 - g * (np.dot(w, kl * mR[:n]) + np.dot(w[:-1], kr[:-1] * mL[1:n]))
        else:
            mR[n] = mL[n]
    integral = np.empty(n_nodes)
    integral[0] = 0.0
    np.cumsum(0.5 * dt * (mR[:-1] + mL[1:]), out=integral[1:])
    return PathSurvivalSolution(t / N, times, mR, mL, integral, params)


def annealed_survival_given_path(path: WalkPath, t: float, h: float, params: ModelParams) -> float:
    """Annealed survival of a fixed walker path: ``exp(-nu gamma int_0^t m)``."""
    if t == 0 or params.gamma == 0:
        return 1.0
    return math.exp(-solve_m_along_path(path, t, h, params).exponent)


# ---------------------------------------------------------------------------
# Hard traps: the origin as an absorbing site

@dataclass(frozen=True, eq=False)
class HittingSolution:
    """Non-hitting probabilities ``phi(s, y) = P_y(no visit to 0 by s)`` of the
    rate-``rho`` walk.

    ``phi`` holds snapshots on the non-negative orthant ``[0, R]^d`` (the
    solution is symmetric under coordinate reflections); ``e1_series`` holds
    the jump-chain values ``w_k(e_1)`` that give ``phi(s, e_1)`` at any
    ``s <= horizon`` through the Poisson mixture.
    """

    box_radius: int
    times: np.ndarray
    phi: np.ndarray
    e1_series: np.ndarray
    rho: float
    horizon: float
    exit_bound: float
    series_tail: float

    def phi_at(self, k: int, y) -> float:
        """Snapshot ``k`` evaluated at lattice point ``y``."""
        idx = tuple(int(abs(c)) for c in np.atleast_1d(y))
        if max(idx) > self.box_radius:
            raise ValueError("point outside the solved box")
        return float(self.phi[(k,) + idx])

    def phi_e1(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s > self.horizon * (1 + 1e-12)):
            raise ValueError("time beyond the solved horizon")
        k = np.arange(self.e1_series.size)
        out = stats.poisson.pmf(k[None, :], self.rho * s[:, None]) @ self.e1_series
        return out if out.size > 1 else float(out[0])

    def integral_phi_e1(self, s: float) -> float:
        """``int_0^s phi(r, e_1) dr``, integrating the Poisson mixture exactly."""
        if s > self.horizon * (1 + 1e-12):
            raise ValueError("time beyond the solved horizon")
        if s <= 0:
            return 0.0
        k = np.arange(self.e1_series.size)
        return float(np.dot(self.e1_series, special.gammainc(k + 1, self.rho * s)) / self.rho)

    def hit_mass(self, s: float) -> float:
        """``sum_y psi(s, y)``: expected number of sites whose trap walk has
        visited the origin by ``s``, ``1 + rho int_0^s phi(r, e_1) dr``.

        The 1 is ``psi(0, 0)``: a trap already at the origin. For ``s > 0``
        it kills the walker, so it belongs in the exponent.
        """
        return 1.0 + self.rho * self.integral_phi_e1(s)

    def exponent(self, s: float, nu: float) -> float:
        """Minus log hard-trap survival ``nu * hit_mass(s)``; 0 at ``s = 0``."""
        return 0.0 if s <= 0 else nu * self.hit_mass(s)


def solve_hitting(t: float, params: ModelParams, box_radius: int | None = None, tol: float = 1e-10,
                  snapshot_times=None) -> HittingSolution:
    """Dirichlet heat flow with the origin absorbing, by uniformization.

    ``w_{k+1} = P w_k`` with ``P`` the neighbour average, ``w(0) = 0`` and
    value 1 outside the box; ``phi(s, .) = sum_k Pois(k; rho s) w_k``. The
    box error is bounded by the probability that the walk from ``e_1``
    leaves the box before ``t``, which must be ``<= tol``.
    """
    d, rho = params.d, params.rho
    e1 = np.zeros(d, dtype=np.int64)
    e1[0] = 1
    if box_radius is None:
        box_radius = max(2, certified_radius(rho, t, d, tol, start=e1))
    exit_bound = exit_probability_bound(e1, box_radius, rho, t, d)
    if exit_bound > tol:
        suggestion = certified_radius(rho, t, d, tol, start=e1)
        raise CertificationError(
            f"box radius {box_radius} gives exit bound {exit_bound:.3g} > tol={tol:.3g}; "
            f"use at least {suggestion}", suggested_radius=suggestion)
    R = int(box_radius)
    lam = rho * t
    K = int(stats.poisson.isf(1e-16, lam)) + 2 if lam > 0 else 1
    series_tail = float(stats.poisson.sf(K - 1, lam)) if lam > 0 else 0.0
    snaps = np.asarray([0.0, t / 4, t / 2, 3 * t / 4, t] if snapshot_times is None else snapshot_times, float)
    weights = stats.poisson.pmf(np.arange(K)[None, :], rho * snaps[:, None])

    shape = (R + 1,) * d
    origin = (0,) * d
    e1_idx = tuple(e1)
    # padded buffer: index 0 mirrors index 2 (reflection), index R+2 stays 1
    buf = np.ones((R + 3,) * d)
    buf[(slice(1, -1),) * d] = 1.0
    buf[(1,) * d] = 0.0
    phi = np.zeros((snaps.size,) + shape)
    series = np.empty(K)
    for k in range(K):
        # w_k equals 1 beyond distance k; without snapshots only the cone
        # feeding w_K(e_1) matters
        r = min(R, k + 1) if snaps.size else min(R, k + 1, K - k + 1)
        core = (slice(1, r + 2),) * d
        w = buf[(slice(1, R + 2),) * d]
        series[k] = w[e1_idx]
        for i in np.nonzero(weights[:, k] > 1e-17)[0]:
            phi[i] += weights[i, k] * w
        for ax in range(d):
            lo = [slice(0, r + 3)] * d
            src = list(lo)
            dst = list(lo)
            src[ax], dst[ax] = 2, 0
            buf[tuple(dst)] = buf[tuple(src)]
        acc = np.zeros((r + 1,) * d)
        for ax in range(d):
            up = list(core)
            dn = list(core)
            up[ax] = slice(2, r + 3)
            dn[ax] = slice(0, r + 1)
            acc += buf[tuple(up)]
            acc += buf[tuple(dn)]
        acc /= 2 * d
        acc[origin] = 0.0
        buf[core] = acc
    return HittingSolution(R, snaps, phi, series, rho, float(t), exit_bound, series_tail)


def infinite_gamma_exponent(t: float, params: ModelParams, tol: float = 1e-10,
                            box_radius: int | None = None) -> float:
    """``nu (1 + rho int_0^t phi(s, e_1) ds)`` = minus the log of the
    hard-trap survival for ``t > 0`` (0 at ``t = 0``)."""
    if t == 0:
        return 0.0
    sol = solve_hitting(t, params, box_radius, tol, snapshot_times=[])
    return sol.exponent(t, params.nu)


def annealed_survival_infinite_gamma(t: float, params: ModelParams, tol: float = 1e-10,
                                     box_radius: int | None = None) -> float:
    """Hard-trap (``gamma = inf``), ``kappa = 0`` annealed survival."""
    return math.exp(-infinite_gamma_exponent(t, params, tol, box_radius))


def pinned_exponent_curve(horizons, h: float, params: ModelParams, tol: float = 1e-10) -> np.ndarray:
    """Minus log annealed survival of the pinned walker at several horizons
    from a single solve up to the largest one."""
    horizons = np.asarray(horizons, dtype=float)
    T = float(horizons.max())
    if params.hard_traps:
        sol = solve_hitting(T, params, None, tol, snapshot_times=[])
        return np.array([sol.exponent(s, params.nu) for s in horizons])
    sol = solve_v0(T, h, params)
    return params.nu * params.gamma * np.interp(horizons, sol.times, sol.running_integral)


class LyapunovBound(NamedTuple):
    value: float
    exponential: bool  # False in d <= 2, where decay is sub-exponential


def lyapunov_annealed_pinned(params: ModelParams) -> LyapunovBound:
    """Annealed Lyapunov exponent of the pinned walker,
    ``nu gamma rho / (rho + gamma G_d(0))``; a lower bound for ``kappa > 0``."""
    if params.d <= 2:
        return LyapunovBound(0.0, False)
    G = green_function(params.d)
    if params.hard_traps:
        return LyapunovBound(params.nu * params.rho / G, True)
    g = params.gamma
    return LyapunovBound(params.nu * g * params.rho / (params.rho + g * G), True)
