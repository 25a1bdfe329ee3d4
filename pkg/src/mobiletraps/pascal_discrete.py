"""
Discrete-time Pascal principle: exact trapping sums for lazy walks.

For a lazy symmetric walk ``Y`` and a deterministic path ``X``, the
trapping sum is::

    S^X_n = sum_y ( 1 - E_y[(1 - q)^{#{0 <= i <= n : Y(i) = X(i)}}] )

and the principle states ``S^X_n >= S^0_n``. With ``q = 1`` the sum is the
expected range of ``Y - X`` after ``n`` steps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

VERDICT_SLACK = 1e-12


class PreconditionError(ValueError):
    """The kernel does not satisfy the laziness hypothesis."""


class EnumerationTooLarge(ValueError):
    def __init__(self, n_sequences, limit):
        super().__init__(f"{n_sequences} step sequences exceed the enumeration limit {limit}")
        self.n_sequences = n_sequences
        self.limit = limit


class LazyWalkKernel:
    """Symmetric one-step law on ``Z^d`` supported on steps of sup-norm <= 1.

    Parameters
    ----------
    step_probs : dict
        Maps step tuples to probabilities. Symmetry ``p(v) = p(-v)`` and
        unit total mass are enforced; laziness ``p(0) >= 1/2`` is reported
        by :attr:`is_lazy` (checks that need it refuse non-lazy kernels).
    """

    def __init__(self, step_probs: dict):
        items = {tuple(int(c) for c in np.atleast_1d(v)): p for v, p in step_probs.items()}
        dims = {len(v) for v in items}
        if len(dims) != 1:
            raise ValueError("all steps must have the same dimension")
        self.d = dims.pop()
        for v, p in items.items():
            if max(abs(c) for c in v) > 1:
                raise ValueError(f"step {v} is not a unit-or-zero lattice step")
            if p < 0:
                raise ValueError("probabilities must be non-negative")
            neg = tuple(-c for c in v)
            if abs(items.get(neg, 0) - p) > 1e-15:
                raise ValueError(f"kernel is not symmetric at step {v}")
        if abs(sum(float(p) for p in items.values()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        self.step_probs = {v: p for v, p in items.items() if p != 0}

    @classmethod
    def simple(cls, d: int = 1, stay=0.5) -> "LazyWalkKernel":
        """Stay with probability ``stay``, else a uniform nearest-neighbour step."""
        probs = {(0,) * d: stay}
        move = (1 - stay) / (2 * d)
        for i in range(d):
            for s in (1, -1):
                e = [0] * d
                e[i] = s
                probs[tuple(e)] = move
        return cls(probs)

    @property
    def stay(self):
        return self.step_probs.get((0,) * self.d, 0)

    @property
    def is_lazy(self) -> bool:
        return self.stay >= 0.5

    def require_lazy(self):
        if not self.is_lazy:
            raise PreconditionError(f"kernel stays with probability {self.stay} < 1/2")

    def exact(self) -> dict:
        return {v: Fraction(p) for v, p in self.step_probs.items()}

    def __repr__(self):
        return f"LazyWalkKernel({self.step_probs})"


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Deterministic path ``X(0), ..., X(n)`` on ``Z^d``; any jumps allowed."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.shape[0] == 0:
            raise ValueError("a path needs at least X(0)")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def zero(cls, n: int, d: int = 1) -> "DiscretePath":
        return cls(np.zeros((n + 1, d), np.int64))

    @classmethod
    def from_steps(cls, steps, d: int = 1, start=None) -> "DiscretePath":
        steps = np.asarray(steps, dtype=np.int64).reshape(-1, d)
        start = np.zeros(d, np.int64) if start is None else np.asarray(start, np.int64)
        return cls(np.vstack([start, start + np.cumsum(steps, axis=0)]))

    @property
    def n(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def nearest_neighbour(self) -> bool:
        return bool(np.all(np.abs(np.diff(self.positions, axis=0)) <= 1))


def _check(kernel, path, n, q):
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > path.n:
        raise ValueError(f"path defined up to {path.n} < n = {n}")
    if path.d != kernel.d:
        raise ValueError("kernel and path dimensions differ")


def _apply_kernel(h, kernel, d):
    """``(P h)(z) = sum_v p(v) h(z + v)`` on the interior of a padded array."""
    inner = tuple(slice(1, -1) for _ in range(d))
    out = None
    for v, p in kernel.step_probs.items():
        sl = tuple(slice(1 + c, h.shape[a] - 1 + c) for a, c in enumerate(v))
        term = p * h[sl]
        out = term if out is None else out + term
    return out if out is not None else np.zeros_like(h[inner])


def _trapping_terms(kernel, path, n, q, exact=False):
    """``1 - h_0`` over the box of sup-radius ``n + max|X|`` (zero outside)."""
    d = kernel.d
    X = path.positions[:n + 1]
    B = n + int(np.max(np.abs(X)))
    width = 2 * B + 1
    if exact:
        one, keep = Fraction(1), 1 - Fraction(q)
        kern = LazyWalkKernel.__new__(LazyWalkKernel)
        kern.d, kern.step_probs = d, kernel.exact()
        dtype = object
    else:
        one, keep, kern, dtype = 1.0, 1.0 - q, kernel, float
    h = np.full((width + 2,) * d, one, dtype=dtype)  # ghost layer stays 1
    inner = tuple(slice(1, -1) for _ in range(d))
    for i in range(n, -1, -1):
        if i < n:
            h[inner] = _apply_kernel(h, kern, d)
        idx = tuple(int(c) + B + 1 for c in X[i])
        h[idx] = h[idx] * keep
    return one - h[inner]


def trapping_sum(kernel: LazyWalkKernel, path: DiscretePath, n: int, q, exact: bool = False):
    """``S^X_n`` by backward dynamic programming over a finite box.

    ``h_i(z) = (1-q)^{1{z = X(i)}} sum_w p(w - z) h_{i+1}(w)``, ``h_{n+1} = 1``
    and ``S = sum_y (1 - h_0(y))``; ``h_0 = 1`` beyond sup-distance
    ``n + max|X|``. With ``exact=True`` all arithmetic is in rationals
    (the exact values of the float inputs).
    """
    _check(kernel, path, n, q)
    terms = _trapping_terms(kernel, path, n, q, exact)
    if exact:
        return sum(terms.ravel().tolist(), Fraction(0))
    return math.fsum(terms.ravel())


def trapping_sums(kernel: LazyWalkKernel, path: DiscretePath, n: int, q) -> np.ndarray:
    """``S^X_k`` for ``k = 0..n``."""
    return np.array([trapping_sum(kernel, path, k, q) for k in range(n + 1)])


class PascalVerdict(NamedTuple):
    s_path: float
    s_zero: float
    margin: float
    holds: bool


def pascal_check(kernel: LazyWalkKernel, path: DiscretePath, n: int, q) -> PascalVerdict:
    """Compare ``S^X_n`` with ``S^0_n`` (needs a lazy kernel)."""
    kernel.require_lazy()
    sx = trapping_sum(kernel, path, n, q)
    s0 = trapping_sum(kernel, DiscretePath.zero(n, kernel.d), n, q)
    return PascalVerdict(sx, s0, sx - s0, sx >= s0 - VERDICT_SLACK)


def expected_range(kernel: LazyWalkKernel, path: DiscretePath, n: int) -> float:
    """``E|R_n(Y - X)|``: the trapping sum with ``q = 1``."""
    return trapping_sum(kernel, path, n, 1.0)


def brute_force_oracle(kernel: LazyWalkKernel, path: DiscretePath, n: int, q, limit: int = 10 ** 6):
    """``S^X_n`` by enumerating every step sequence of ``Y``, in exact rationals.

    For a step sequence with partial sums ``P_i``, the walk from ``y`` meets
    the path at time ``i`` iff ``y = X(i) - P_i``; so each sequence adds
    ``sum_y (1 - (1-q)^{c(y)})`` with ``c(y)`` the multiplicity of ``y``
    among the ``X(i) - P_i``.
    """
    _check(kernel, path, n, q)
    support = list(kernel.exact().items())
    count = len(support) ** n
    if count > limit:
        raise EnumerationTooLarge(count, limit)
    keep = 1 - Fraction(q)
    X = [tuple(int(c) for c in row) for row in path.positions[:n + 1]]
    d = kernel.d
    total = Fraction(0)
    for seq in itertools.product(support, repeat=n):
        w = Fraction(1)
        P = [0] * d
        hits = {}
        pts = [X[0]]
        for i, (v, p) in enumerate(seq, start=1):
            w *= p
            P = [a + b for a, b in zip(P, v)]
            pts.append(tuple(x - s for x, s in zip(X[i], P)))
        for y in pts:
            hits[y] = hits.get(y, 0) + 1
        total += w * sum((1 - keep ** c for c in hits.values()), Fraction(0))
    return total


def n_step_law(kernel: LazyWalkKernel, n: int) -> dict:
    """Exact ``n``-step probabilities as a dict of rationals."""
    law = {(0,) * kernel.d: Fraction(1)}
    steps = kernel.exact()
    for _ in range(n):
        nxt = {}
        for x, px in law.items():
            for v, pv in steps.items():
                y = tuple(a + b for a, b in zip(x, v))
                nxt[y] = nxt.get(y, 0) + px * pv
        law = nxt
    return law


class MonotonicityReport(NamedTuple):
    holds: bool
    p0: list                 # p_n(0) for n = 0..n_max (exact)
    violations: list         # (n, kind, y) tuples


def kernel_monotonicity_check(kernel: LazyWalkKernel, n_max: int) -> MonotonicityReport:
    """Check ``p_n(0) >= p_n(y)`` and ``p_n(0) >= p_{n+1}(0)`` exactly for
    ``n <= n_max`` (``n + 1`` up to ``n_max + 1``).

    Non-lazy kernels are accepted so that violations can be documented.
    """
    origin = (0,) * kernel.d
    laws = [n_step_law(kernel, 0)]
    for _ in range(n_max + 1):
        nxt = {}
        for x, px in laws[-1].items():
            for v, pv in kernel.exact().items():
                y = tuple(a + b for a, b in zip(x, v))
                nxt[y] = nxt.get(y, 0) + px * pv
        laws.append(nxt)
    p0 = [law.get(origin, Fraction(0)) for law in laws]
    bad = []
    for n in range(1, n_max + 1):
        for y, p in laws[n].items():
            if p > p0[n]:
                bad.append((n, "peak", y))
        if p0[n + 1] > p0[n]:
            bad.append((n, "decrease", origin))
    return MonotonicityReport(not bad, p0[:n_max + 1], bad)


class InductionStep(NamedTuple):
    n: int
    lhs: float
    rhs: float
    residual: float
    holds: bool


def induction_gap(kernel: LazyWalkKernel, path: DiscretePath, n: int, q) -> list:
    """Both sides of the induction inequality

    ``D_k >= (1 - q p_1(0)) D_{k-1} + q sum_{j<=k-2} (p_{k-j-1}(0) - p_{k-j}(0)) D_j``

    with ``D_k = S^X_k - S^0_k``, for ``k = 1..n``.
    """
    kernel.require_lazy()
    _check(kernel, path, n, q)
    sx = trapping_sums(kernel, path, n, q)
    s0 = trapping_sums(kernel, DiscretePath.zero(n, kernel.d), n, q)
    D = sx - s0
    origin = (0,) * kernel.d
    p = [float(n_step_law(kernel, m).get(origin, 0)) for m in range(n + 1)]
    out = []
    for k in range(1, n + 1):
        rhs = (1 - q * p[1]) * D[k - 1]
        rhs += q * sum((p[k - j - 1] - p[k - j]) * D[j] for j in range(k - 1))
        out.append(InductionStep(k, float(D[k]), float(rhs), float(D[k] - rhs),
                                 bool(D[k] >= rhs - VERDICT_SLACK)))
    return out


def all_step_paths(n: int, steps=(-1, 0, 1)):
    """Every ``d = 1`` path of ``n`` steps from ``steps``, starting at 0."""
    for seq in itertools.product(steps, repeat=n):
        yield seq, DiscretePath.from_steps(seq, 1)


def continuous_bridge(t: float, n: int, gamma: float = 1.0, rho: float = 1.0, d: int = 1) -> float:
    """Discrete analogue of ``gamma int_0^t v_0``: ``S^0_n`` for the walk
    observed on a mesh ``t/n`` (stay ``1 - rho t/n``, else a uniform
    neighbour) with ``q = gamma t / n``."""
    dt = t / n
    if rho * dt > 0.5 or gamma * dt > 1:
        raise ValueError("mesh too coarse: need rho t/n <= 1/2 and gamma t/n <= 1")
    kernel = LazyWalkKernel.simple(d, 1.0 - rho * dt)
    return trapping_sum(kernel, DiscretePath.zero(n, d), n, gamma * dt)
