"""
Poisson system of moving traps on a finite, certified space-time window.

Traps are stored exactly as event lists (start site, jump times, unit
steps). The random numbers for the traps starting at a site depend only
on ``(seed, stream, site)``, so enlarging the window never changes the
traps already present and any subset of sites can be generated in any
order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import stats

from . import kernels, rng
from .lattice_kernels import ModelParams, as_point, displacement_tail_bound

FORMAT_VERSION = 1


class OutOfWindowError(ValueError):
    """A query reached outside the certified observation box or horizon."""


def window_radius(obs_radius: int, horizon: float, rho: float, epsilon: float,
                  d: int = 1, nu: float = 1.0) -> int:
    """Padded radius ``R`` such that the expected number (hence the probability)
    of traps started outside the sup-norm ball of radius ``R`` that enter the
    observation box before ``horizon`` is at most ``epsilon``.

    A trap at sup-distance ``r`` must move one coordinate by ``r - obs_radius``
    toward the box; reflection and the coordinate Chernoff bound give
    ``2 exp(-mu j((r-b)/mu))`` with ``mu = rho T / d``, summed over shells.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if horizon <= 0 or nu == 0:
        return int(obs_radius)
    mu = rho * horizon / d
    L = 64
    while True:
        r = np.arange(obs_radius + 1, obs_radius + L + 1)
        shell = (2.0 * r + 1) ** d - (2.0 * r - 1) ** d
        terms = nu * shell * 2.0 * displacement_tail_bound(r - obs_radius, mu)
        if terms[-1] < 1e-3 * epsilon / L:
            break
        L *= 2
    tail = np.cumsum(terms[::-1])[::-1]  # tail[k] = sum over r >= obs_radius + 1 + k
    ok = np.nonzero(tail <= epsilon)[0]
    return int(obs_radius + ok[0])


@dataclass(frozen=True)
class TrapFieldConfig:
    params: ModelParams
    obs_radius: int
    horizon: float
    epsilon_window: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon_window < 1:
            raise ValueError("epsilon_window must lie in (0, 1)")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.obs_radius < 0:
            raise ValueError("obs_radius must be non-negative")

    def as_dict(self) -> dict:
        return dict(params=self.params.as_dict(), obs_radius=int(self.obs_radius),
                    horizon=float(self.horizon), epsilon_window=float(self.epsilon_window),
                    seed=int(self.seed))

    @classmethod
    def from_dict(cls, data: dict) -> "TrapFieldConfig":
        p = dict(data["params"])
        p["gamma"] = float(p["gamma"])
        return cls(ModelParams(**p), data["obs_radius"], data["horizon"],
                   data["epsilon_window"], data["seed"])


@dataclass(frozen=True)
class TrapTrajectory:
    start: np.ndarray
    jump_times: np.ndarray
    steps: np.ndarray  # (n_jumps, d) unit vectors


def box_sites(radius: int, d: int) -> np.ndarray:
    """All lattice points of sup-norm at most ``radius``, shape (n, d)."""
    axes = [np.arange(-radius, radius + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def _sample_traps(field_keys, sites, nu, rho, horizon, d):
    """Vectorised trap generation for several fields at once.

    Returns (field_of_trap, start, trap_ptr, jump_times, steps).
    """
    field_keys = np.atleast_1d(field_keys)
    F, S = field_keys.shape[0], sites.shape[0]
    sk = rng.site_key(field_keys[:, None], np.broadcast_to(sites, (F, S, d)))
    counts = rng.poisson(sk, 0, nu).ravel() if nu > 0 else np.zeros(F * S, np.int64)
    M = int(counts.sum())
    pair = np.repeat(np.arange(F * S), counts)
    j_in = np.arange(M) - np.repeat(np.cumsum(counts) - counts, counts)
    tkeys = rng.derive(sk.ravel()[pair], j_in + 1)
    field_of_trap = pair // S
    start = sites[pair % S]

    trap_ptr, times, steps = sample_jumps(tkeys, rho, horizon, d)
    return field_of_trap, start.astype(np.int64), trap_ptr, times, steps


def sample_jumps(keys, rate, horizon, d):
    """Rate-``rate`` simple random walk increments on ``[0, horizon]``, one
    process per key. Jump count uses counter 0, the ``i``-th jump time and
    direction counters ``1 + 2i`` and ``2 + 2i``.

    Returns (ptr, jump_times, steps) in flat event-list form.
    """
    keys = np.atleast_1d(keys)
    M = keys.shape[0]
    if M and rate * horizon > 0:
        n_jumps = rng.poisson(keys, 0, rate * horizon)
    else:
        n_jumps = np.zeros(M, np.int64)
    J = int(n_jumps.sum())
    owner = np.repeat(np.arange(M), n_jumps)
    i_in = np.arange(J) - np.repeat(np.cumsum(n_jumps) - n_jumps, n_jumps)
    okeys = keys[owner]
    u = rng.uniform(okeys, 1 + 2 * i_in)
    times = horizon * u
    dirs = np.minimum((2 * d * rng.uniform(okeys, 2 + 2 * i_in)).astype(np.int64), 2 * d - 1)
    # owner blocks are contiguous, so sorting owner + u orders times within each trap
    order = np.argsort(owner + u, kind="stable")
    times, dirs = times[order], dirs[order]
    steps = np.zeros((J, d), dtype=np.int64)
    steps[np.arange(J), dirs // 2] = np.where(dirs % 2 == 0, 1, -1)
    ptr = np.concatenate([[0], np.cumsum(n_jumps)]).astype(np.int64)
    return ptr, times, steps


def _positions_after(start, trap_ptr, steps):
    J = steps.shape[0]
    if J == 0:
        return np.zeros((0, start.shape[1]), dtype=np.int64)
    owner = np.repeat(np.arange(start.shape[0]), np.diff(trap_ptr))
    cs = np.cumsum(steps, axis=0)
    cs_pad = np.vstack([np.zeros((1, steps.shape[1]), np.int64), cs])
    return start[owner] + cs - cs_pad[trap_ptr[owner]]


class TrapFieldRealization:
    """An immutable sampled trap system on ``[0, horizon]``.

    Attributes
    ----------
    config : TrapFieldConfig
    window_radius : int
        Sup-norm radius of the sites whose traps were generated.
    stream : int
        Replicate index under ``config.seed``.
    start, trap_ptr, jump_times, steps : ndarray
        Flat event-list storage; trap ``k`` owns jumps
        ``trap_ptr[k]:trap_ptr[k+1]``.
    """

    def __init__(self, config, window_radius, start, trap_ptr, jump_times, steps, stream=0):
        self.config = config
        self.window_radius = int(window_radius)
        self.stream = int(stream)
        d = config.params.d
        self.start = np.asarray(start, dtype=np.int64).reshape(-1, d)
        self.trap_ptr = np.asarray(trap_ptr, dtype=np.int64)
        self.jump_times = np.asarray(jump_times, dtype=np.float64)
        self.steps = np.asarray(steps, dtype=np.int64).reshape(-1, d)
        for a in (self.start, self.trap_ptr, self.jump_times, self.steps):
            a.setflags(write=False)

    # -- construction -------------------------------------------------------
    @classmethod
    def from_trajectories(cls, config, trajectories, window_radius=None):
        """Build a realization from explicit trajectories (tests, replays)."""
        d = config.params.d
        starts = [as_point(tr.start, d) for tr in trajectories]
        times = [np.asarray(tr.jump_times, float) for tr in trajectories]
        steps = [np.asarray(tr.steps, np.int64).reshape(-1, d) for tr in trajectories]
        for t in times:
            if np.any(np.diff(t) <= 0) or np.any(t < 0) or np.any(t > config.horizon):
                raise ValueError("jump times must be strictly increasing within [0, horizon]")
        for s in steps:
            if s.size and not (np.all(np.abs(s).sum(axis=1) == 1)):
                raise ValueError("steps must be unit lattice vectors")
        ptr = np.concatenate([[0], np.cumsum([len(t) for t in times])]).astype(np.int64)
        if window_radius is None:
            window_radius = max([config.obs_radius] + [int(np.max(np.abs(s))) for s in starts])
        return cls(config, window_radius,
                   np.array(starts, np.int64).reshape(-1, d), ptr,
                   np.concatenate(times) if times else np.zeros(0),
                   np.vstack(steps) if steps else np.zeros((0, d), np.int64))

    # -- basic views ---------------------------------------------------------
    @property
    def params(self) -> ModelParams:
        return self.config.params

    @property
    def horizon(self) -> float:
        return self.config.horizon

    @property
    def n_traps(self) -> int:
        return self.start.shape[0]

    def __len__(self):
        return self.n_traps

    def trajectory(self, k: int) -> TrapTrajectory:
        a, b = self.trap_ptr[k], self.trap_ptr[k + 1]
        return TrapTrajectory(self.start[k].copy(), self.jump_times[a:b].copy(), self.steps[a:b].copy())

    @property
    def trajectories(self) -> list:
        return [self.trajectory(k) for k in range(self.n_traps)]

    @cached_property
    def pos_after(self) -> np.ndarray:
        return _positions_after(self.start, self.trap_ptr, self.steps)

    @cached_property
    def _owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_traps), np.diff(self.trap_ptr))

    @cached_property
    def _bbox(self):
        lo, hi = self.start.copy(), self.start.copy()
        if self.steps.shape[0]:
            np.minimum.at(lo, self._owner, self.pos_after)
            np.maximum.at(hi, self._owner, self.pos_after)
        return lo, hi

    # -- checks --------------------------------------------------------------
    def _check_time(self, *ts):
        for t in ts:
            if t < 0 or t > self.horizon:
                raise OutOfWindowError(f"time {t} outside [0, {self.horizon}]")

    def _check_sites(self, pts):
        pts = np.asarray(pts).reshape(-1, self.params.d)
        if pts.size and np.max(np.abs(pts)) > self.config.obs_radius:
            raise OutOfWindowError(
                f"site outside the observation box of radius {self.config.obs_radius}")

    # -- queries -------------------------------------------------------------
    def positions_at(self, t: float) -> np.ndarray:
        """Positions of all traps at time ``t`` (right-continuous)."""
        self._check_time(t)
        before = np.bincount(self._owner[self.jump_times <= t], minlength=self.n_traps)
        idx = self.trap_ptr[:-1] + before - 1
        if self.pos_after.shape[0] == 0:
            return self.start.copy()
        return np.where((before > 0)[:, None], self.pos_after[np.maximum(idx, 0)], self.start)

    def integrate_along_path(self, path, t0: float, t1: float) -> float:
        return float(np.sum(self.trap_overlaps(path, t0, t1)))

    def trap_overlaps(self, path, t0: float, t1: float) -> np.ndarray:
        """Per-trap time spent on the path's site during ``[t0, t1]``."""
        self._check_time(t0, t1)
        ptimes, ppos = path.events_on(t0, t1)
        self._check_sites(ppos)
        lo, hi = self._bbox
        plo, phi = ppos.min(axis=0), ppos.max(axis=0)
        sel = np.nonzero(np.all((lo <= phi) & (hi >= plo), axis=1))[0]
        out = np.zeros(self.n_traps)
        out[sel] = kernels.path_overlaps(self.trap_ptr, self.jump_times, self.start,
                                         self.pos_after, sel, ptimes, ppos, t0, t1)
        return out

    def cumulative_occupation(self, times, box_radius: int) -> np.ndarray:
        """``O(tau, x) = int_0^tau xi(s, x) ds`` for each time and each site of
        the sup-norm box of ``box_radius``; shape ``(len(times),) + (2R+1,)*d``.

        Exact: ``O`` is piecewise linear with slope changes at trap arrivals
        and departures, accumulated as ``tau * C(tau) - S(tau)``.
        """
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted")
        self._check_time(times[0], times[-1])
        if box_radius > self.config.obs_radius:
            raise OutOfWindowError(
                f"box radius {box_radius} exceeds certified observation radius {self.config.obs_radius}")
        d, R = self.params.d, box_radius
        width = 2 * R + 1
        M, J = self.n_traps, self.steps.shape[0]
        # segment k of trap m: position after k jumps, on [jump_{k}, jump_{k+1})
        seg_pos = np.empty((M + J, d), np.int64)
        seg_t0 = np.empty(M + J)
        seg_t1 = np.empty(M + J)
        first = self.trap_ptr[:-1] + np.arange(M)
        seg_pos[first] = self.start
        seg_t0[first] = 0.0
        later = np.ones(M + J, bool)
        later[first] = False
        seg_pos[later] = self.pos_after
        seg_t0[later] = self.jump_times
        seg_t1[:-1] = seg_t0[1:]
        if M:
            seg_t1[np.append(first[1:] - 1, M + J - 1)] = self.horizon
        inside = np.all(np.abs(seg_pos) <= R, axis=1)
        flat = np.ravel_multi_index(tuple((seg_pos[inside] + R).T), (width,) * d)
        ev_t = np.concatenate([seg_t0[inside], seg_t1[inside]])
        ev_s = np.concatenate([np.ones(flat.size), -np.ones(flat.size)])
        ev_x = np.concatenate([flat, flat])
        bins = np.searchsorted(times, ev_t, side="left")
        keep = bins < times.size
        n_sites = width ** d
        C = np.zeros((times.size, n_sites))
        S = np.zeros((times.size, n_sites))
        np.add.at(C, (bins[keep], ev_x[keep]), ev_s[keep])
        np.add.at(S, (bins[keep], ev_x[keep]), ev_s[keep] * ev_t[keep])
        np.cumsum(C, axis=0, out=C)
        np.cumsum(S, axis=0, out=S)
        occ = times[:, None] * C - S
        np.maximum(occ, 0.0, out=occ)
        return occ.reshape((times.size,) + (width,) * d)

    # -- persistence ---------------------------------------------------------
    def save(self, path) -> None:
        save_field(path, self)


def occupancy(field: TrapFieldRealization, t: float, x) -> int:
    """Number of traps at site ``x`` at time ``t``."""
    x = as_point(x, field.params.d)
    field._check_sites(x)
    pos = field.positions_at(t)
    return int(np.sum(np.all(pos == x, axis=1)))


def integrate_along_path(field: TrapFieldRealization, path, t0: float, t1: float) -> float:
    """Exact ``int_{t0}^{t1} xi(s, X(s)) ds`` for a piecewise-constant path."""
    return field.integrate_along_path(path, t0, t1)


def field_key(seed: int, stream: int = 0):
    return rng.derive(rng.seed_key(seed), np.int64(stream))


def sample_field(config: TrapFieldConfig, stream: int = 0) -> TrapFieldRealization:
    """Sample the traps of replicate ``stream`` on the certified padded window.

    Site counts are i.i.d. Poisson(nu); each trap jumps at the times of a
    rate-rho Poisson process on ``[0, horizon]`` with uniform unit steps.
    """
    p = config.params
    R = window_radius(config.obs_radius, config.horizon, p.rho, config.epsilon_window, p.d, p.nu)
    sites = box_sites(R, p.d)
    _, start, ptr, times, steps = _sample_traps(
        field_key(config.seed, stream), sites, p.nu, p.rho, config.horizon, p.d)
    return TrapFieldRealization(config, R, start, ptr, times, steps, stream=stream)


def sample_fields_batch(config: TrapFieldConfig, streams):
    """Flat trap arrays for many replicates at once plus the owning replicate
    of each trap (used by the annealed Monte Carlo)."""
    p = config.params
    R = window_radius(config.obs_radius, config.horizon, p.rho, config.epsilon_window, p.d, p.nu)
    keys = field_key(config.seed, np.asarray(streams, dtype=np.int64))
    return R, _sample_traps(keys, box_sites(R, p.d), p.nu, p.rho, config.horizon, p.d)


def save_field(path, field: TrapFieldRealization) -> None:
    """Write a field as ``.npz``: seed + config (enough to regenerate) plus the
    sampled event lists."""
    meta = dict(format="mobiletraps-field", version=FORMAT_VERSION,
                config=field.config.as_dict(), stream=field.stream,
                window_radius=field.window_radius)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, meta=json.dumps(meta), start=field.start, trap_ptr=field.trap_ptr,
                            jump_times=field.jump_times, steps=field.steps)


def load_field(path, verify: bool = False) -> TrapFieldRealization:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != "mobiletraps-field" or meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported field file: {meta.get('format')} v{meta.get('version')}")
        config = TrapFieldConfig.from_dict(meta["config"])
        field = TrapFieldRealization(config, meta["window_radius"], data["start"], data["trap_ptr"],
                                     data["jump_times"], data["steps"], stream=meta["stream"])
    if verify:
        fresh = sample_field(config, field.stream)
        same = (fresh.window_radius == field.window_radius
                and np.array_equal(fresh.start, field.start)
                and np.array_equal(fresh.trap_ptr, field.trap_ptr)
                and np.array_equal(fresh.jump_times, field.jump_times)
                and np.array_equal(fresh.steps, field.steps))
        if not same:
            raise ValueError("stored field does not match regeneration from its seed")
    return field


# ---------------------------------------------------------------------------
# Law checks on the sampled system

def _batch_positions(start, ptr, times, steps, t):
    """Positions at time ``t`` of traps stored in flat event lists."""
    M = start.shape[0]
    if steps.shape[0] == 0:
        return start.copy()
    owner = np.repeat(np.arange(M), np.diff(ptr))
    done = times <= t
    disp = np.stack([np.bincount(owner[done], weights=steps[done, k], minlength=M)
                     for k in range(start.shape[1])], axis=1)
    return start + disp.astype(np.int64)


def _box_counts(config, streams, times):
    """Counts ``(len(times), n_fields, n_sites)`` of traps per site of the
    observation box."""
    d = config.params.d
    b = config.obs_radius
    width = 2 * b + 1
    _, (owner, start, ptr, jt, steps) = sample_fields_batch(config, streams)
    F = len(streams)
    out = np.zeros((len(times), F, width ** d), np.int64)
    for k, t in enumerate(times):
        pos = _batch_positions(start, ptr, jt, steps, t)
        inside = np.all(np.abs(pos) <= b, axis=1)
        flat = np.ravel_multi_index(tuple((pos[inside] + b).T), (width,) * d)
        out[k] = np.bincount(owner[inside] * width ** d + flat,
                             minlength=F * width ** d).reshape(F, -1)
    return out


@dataclass(frozen=True)
class GoodnessOfFit:
    t: float
    statistic: float
    pvalue: float
    dof: int
    n_sites: int
    passes: bool


def site_count_gof(config: TrapFieldConfig, streams, times=None, alpha: float = 0.01) -> list:
    """Chi-square fit of per-site trap counts in the observation box to
    Poisson(nu), pooling fields ``streams``, at each time slice.

    Counts are binned ``0, 1, ..., k`` with the upper tail pooled so that
    every bin expects at least 5 sites.
    """
    nu = config.params.nu
    T = config.horizon
    times = [0.0, T / 2, T] if times is None else list(times)
    counts = _box_counts(config, list(streams), times)
    res = []
    for k, t in enumerate(times):
        c = counts[k].ravel()
        n = c.size
        kmax = 0
        while n * stats.poisson.sf(kmax, nu) >= 5 and n * stats.poisson.pmf(kmax + 1, nu) >= 5:
            kmax += 1
        obs = np.array([np.sum(c == j) for j in range(kmax)] + [np.sum(c >= kmax)], float)
        exp = n * np.append(stats.poisson.pmf(np.arange(kmax), nu), stats.poisson.sf(kmax - 1, nu))
        stat, p = stats.chisquare(obs, exp)
        res.append(GoodnessOfFit(float(t), float(stat), float(p), kmax, n, bool(p > alpha)))
    return res


@dataclass(frozen=True)
class ReversalCovariance:
    forward: float   # E[xi(0, x) xi(T, y)]
    backward: float  # E[xi(0, y) xi(T, x)]
    difference: float
    stderr: float
    within: bool     # |difference| <= 3 stderr


def reversal_covariance(config: TrapFieldConfig, x, y, streams) -> ReversalCovariance:
    """Compare ``E[xi(0,x) xi(T,y)]`` with ``E[xi(0,y) xi(T,x)]`` over fields."""
    d = config.params.d
    b = config.obs_radius
    width = 2 * b + 1
    ix = np.ravel_multi_index(tuple(as_point(x, d) + b), (width,) * d)
    iy = np.ravel_multi_index(tuple(as_point(y, d) + b), (width,) * d)
    c0, cT = _box_counts(config, list(streams), [0.0, config.horizon])
    f = c0[:, ix] * cT[:, iy]
    g = c0[:, iy] * cT[:, ix]
    diff = (f - g).astype(float)
    n = diff.size
    se = float(diff.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    m = float(diff.mean())
    return ReversalCovariance(float(f.mean()), float(g.mean()), m, se, bool(abs(m) <= 3 * se))
