"""
Continuous-time simple random walk kernels on Z^d.

The walk with jump rate ``r`` moves each coordinate independently at rate
``r/d``, so its transition probability factorises into exponentially
scaled modified Bessel functions::

    p_t(x) = prod_i exp(-t r/d) I_{|x_i|}(t r/d)

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

INFINITY = math.inf


class DivergenceError(ValueError):
    """Raised when a requested lattice quantity is infinite (recurrent walk)."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the walker/trap system.

    ``gamma`` may be ``math.inf`` (hard traps) or negative (catalytic case,
    accepted by the solvers but not covered by any asymptotic statement).
    ``gamma == 0`` and ``nu == 0`` are allowed as degenerate validation inputs.
    """

    d: int = 1
    kappa: float = 0.0
    rho: float = 1.0
    nu: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not self.rho > 0:
            raise ValueError(f"trap jump rate rho must be > 0, got {self.rho}")
        if not self.kappa >= 0:
            raise ValueError(f"walker jump rate kappa must be >= 0, got {self.kappa}")
        if not self.nu >= 0:
            raise ValueError(f"trap density nu must be >= 0, got {self.nu}")
        if math.isnan(self.gamma) or self.gamma == -math.inf:
            raise ValueError(f"invalid coupling gamma={self.gamma}")

    @property
    def hard_traps(self) -> bool:
        return math.isinf(self.gamma)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(d=self.d, kappa=self.kappa, rho=self.rho, nu=self.nu, gamma=self.gamma)
        fields.update(changes)
        return ModelParams(**fields)

    def as_dict(self) -> dict:
        return dict(d=self.d, kappa=self.kappa, rho=self.rho, nu=self.nu,
                    gamma="inf" if self.hard_traps else self.gamma)


def as_point(x, d: int | None = None) -> np.ndarray:
    """Coerce ``x`` to an integer lattice point (1-d int64 array)."""
    p = np.atleast_1d(np.asarray(x))
    if p.ndim != 1 or not np.all(np.equal(np.mod(p, 1), 0)):
        raise ValueError(f"not a lattice point: {x!r}")
    p = p.astype(np.int64)
    if d is not None and p.shape[0] != d:
        raise ValueError(f"lattice point {x!r} does not have dimension {d}")
    return p


# ---------------------------------------------------------------------------
# Bessel functions

def bessel_i_scaled(order, x):
    """``exp(-x) * I_order(x)`` for ``x >= 0``; never overflows."""
    return special.ive(np.abs(order), x)


def bessel_i(order, x):
    """Modified Bessel function of the first kind ``I_order(x)``.

    Overflows to ``inf`` for ``x`` beyond about 713; use
    :func:`bessel_i_scaled` there.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise ValueError("x must be finite")
    return special.iv(np.abs(order), x)


# ---------------------------------------------------------------------------
# Transition kernel

def transition_prob(t, x, rate: float, d: int):
    """Transition probability ``p_t(x)`` of the rate-``rate`` walk on Z^d.

    Parameters
    ----------
    t : float or array
        Elapsed time(s), broadcast against the leading axes of ``x``.
    x : array_like, shape (..., d)
        Displacement(s).
    rate : float
        Total jump rate. ``rate == 0`` gives the Kronecker delta.
    d : int
        Lattice dimension.
    """
    x = np.abs(np.asarray(x, dtype=np.int64))
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != d:
        raise ValueError(f"displacement last axis must have length {d}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    arg = t[..., None] * (rate / d)
    out = np.prod(special.ive(x, arg), axis=-1)
    return out[()] if out.ndim == 0 else out


def _p0(t, d: int):
    return special.ive(0, np.asarray(t, dtype=float) / d) ** d


# ---------------------------------------------------------------------------
# Green function and Laplace transform

def _large_t_coefficients(d: int, order: int = 5) -> np.ndarray:
    """Coefficients c_k with p_t(0) ~ (d/(2 pi t))^{d/2} sum_k c_k (d/t)^k."""
    # exp(-x) I_0(x) ~ (2 pi x)^{-1/2} sum_k a_k x^{-k}
    a = np.array([math.prod(range(1, 2 * k, 2)) ** 2 / (math.factorial(k) * 8 ** k)
                  for k in range(order)], dtype=float)
    c = np.zeros(order)
    c[0] = 1.0
    for _ in range(d):
        c = np.convolve(c, a)[:order]
    return c


def _p0_tail_integral(T: float, d: int, order: int = 5) -> tuple[float, float]:
    """Integral of the large-t expansion of p_t(0) over [T, inf), with the
    magnitude of the last retained term as an error proxy."""
    c = _large_t_coefficients(d, order)
    pref = (d / (2 * math.pi)) ** (d / 2)
    terms = [pref * c[k] * d ** k * T ** (1 - d / 2 - k) / (d / 2 + k - 1) for k in range(order)]
    return float(sum(terms)), abs(terms[-1])


def green_function(d: int, tol: float = 1e-10) -> float:
    """Green function ``G_d(0) = int_0^inf p_t(0) dt`` of the rate-1 walk.

    Quadrature on ``[0, T*]`` plus an analytic tail from the large-t
    expansion of ``p_t(0)``; ``T*`` is doubled until the neglected tail
    term is below ``tol/2``.
    """
    if d <= 2:
        raise DivergenceError(f"G_d(0) diverges in d={d} (recurrent walk)")
    T = 200.0
    while True:
        tail, err = _p0_tail_integral(T, d)
        if err < tol / 2:
            break
        T *= 2
    edges = [0.0, 1.0, 10.0, 50.0]
    edges += list(np.geomspace(100.0, T, max(2, int(math.log2(T / 100.0)) + 2)))
    edges = sorted(set(e for e in edges if e <= T))
    body = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(_p0, a, b, args=(d,), epsabs=tol / (8 * len(edges)),
                                epsrel=1e-14, limit=200)
        body += val
    return body + tail


def laplace_p(lam: float, d: int) -> float:
    """Laplace transform ``int_0^inf exp(-lam t) p_t(0) dt`` of the rate-1 walk.

    The upper cutoff grows geometrically until the bound
    ``p_T(0) exp(-lam T) / lam`` on the remainder (``p_t(0)`` is
    decreasing) is below ``1e-11`` relative.
    """
    if lam < 0 or (lam == 0 and d <= 2):
        raise DivergenceError(f"Laplace transform diverges at lambda={lam} in d={d}")
    if lam == 0:
        return green_function(d, tol=1e-12)

    def f(t):
        return math.exp(-lam * t) * float(_p0(t, d))

    total, a, b = 0.0, 0.0, 1.0
    while True:
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        remainder = float(_p0(b, d)) * math.exp(-lam * b) / lam
        if remainder < 1e-11 * total:
            return total
        a, b = b, 4 * b


def hat_v0(lam: float, params: ModelParams) -> float:
    """Closed-form Laplace transform of the pinned trap-avoidance function
    ``v_0(t, 0)``: ``(1/lam) * rho / (rho + gamma * laplace_p(lam/rho))``."""
    if not np.isfinite(params.gamma):
        raise ValueError("hat_v0 requires finite gamma")
    rho, g = params.rho, params.gamma
    return (1.0 / lam) * rho / (rho + g * laplace_p(lam / rho, params.d))


# ---------------------------------------------------------------------------
# Large deviations

def _j(y):
    y = np.asarray(y, dtype=float)
    return y * np.arcsinh(y) - np.sqrt(y * y + 1.0) + 1.0


def rate_function_J(v, kappa: float, d: int) -> float:
    """Large-deviation rate ``J(v) = sum_i (kappa/d) j(d v_i / kappa)`` of the
    rate-``kappa`` walk, with ``j(y) = y asinh(y) - sqrt(y^2+1) + 1``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape[-1] != d:
        raise ValueError(f"velocity must have length {d}")
    if kappa == 0:
        return 0.0 if not np.any(v) else math.inf
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return float(np.sum((kappa / d) * _j(d * v / kappa)))


def lclt_approx(t: float, x, kappa: float, d: int) -> float:
    """Local-CLT/large-deviation approximation to ``p_{kappa t}(x)``::

        exp(-J(x/t) t) / ((2 pi t)^{d/2} prod_i (x_i^2/t^2 + kappa^2/d^2)^{1/4})
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    v = x / t
    pref = np.prod((v * v + (kappa / d) ** 2) ** 0.25)
    return float(math.exp(-rate_function_J(v, kappa, d) * t) / ((2 * math.pi * t) ** (d / 2) * pref))


def displacement_tail_bound(distance, mean_jumps: float):
    """Chernoff bound ``exp(-mu j(a/mu))`` on ``P(S >= a)`` for one coordinate of a
    walk making Poisson(``mean_jumps``) symmetric +-1 steps; 1 for ``a <= 0``."""
    a = np.asarray(distance, dtype=float)
    if mean_jumps <= 0:
        return np.where(a > 0, 0.0, 1.0)
    out = np.exp(-mean_jumps * _j(np.maximum(a, 0.0) / mean_jumps))
    return np.where(a > 0, out, 1.0)


def exit_probability_bound(start, radius: int, rate: float, horizon: float, d: int) -> float:
    """Upper bound on the probability that a rate-``rate`` walk started at
    ``start`` leaves the sup-norm box of ``radius`` before ``horizon``.

    Union over coordinates and both directions, reflection principle
    (factor 2) and the per-coordinate Chernoff bound.
    """
    start = as_point(start, d)
    mu = rate * horizon / d
    total = 0.0
    for s in start:
        for dist in (radius + 1 - s, radius + 1 + s):
            total += 2.0 * float(displacement_tail_bound(dist, mu))
    return min(1.0, total)


def certified_radius(rate: float, horizon: float, d: int, eps: float, start=None) -> int:
    """Smallest box radius whose :func:`exit_probability_bound` is ``<= eps``."""
    start = np.zeros(d, dtype=np.int64) if start is None else as_point(start, d)
    r = int(np.max(np.abs(start)))
    step = 1
    while exit_probability_bound(start, r, rate, horizon, d) > eps:
        r += step
        step = min(step * 2, 64)
    # back off the overshoot from the accelerated search
    while r > 0 and exit_probability_bound(start, r - 1, rate, horizon, d) <= eps:
        r -= 1
    return r
