"""
Monte Carlo survival estimators and the lattice Feynman-Kac (PAM) solver.

All randomness comes from counter streams, so every estimate is a pure
function of its seed: replicate ``i`` reads only the keys under index ``i``
and reductions use exactly rounded sums, which makes results independent
of the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import stats

from . import kernels
from .lattice_kernels import ModelParams, certified_radius, exit_probability_bound
from .paths import WalkPath
from .rng import CounterStream
from .trap_field import (OutOfWindowError, TrapFieldConfig, TrapFieldRealization, sample_field,
                         sample_fields_batch, sample_jumps)

__all__ = ["WalkPath", "McEstimate", "PamGrid", "sample_walk", "sample_walks",
           "quenched_survival_mc", "annealed_survival_mc", "pam_solve",
           "quenched_survival_pde", "quenched_log_survival_pde", "lyapunov_quenched_estimate"]


def _as_stream(rng) -> CounterStream:
    if isinstance(rng, CounterStream):
        return rng
    if rng is None:
        return CounterStream(0)
    return CounterStream(int(rng))


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error.

    ``excluded`` counts replicates dropped because the walker left the
    certified box; ``bias_bound`` bounds the resulting bias plus the field
    truncation error.
    """

    mean: float
    stderr: float
    n: int
    seed: dict
    excluded: int = 0
    bias_bound: float = 0.0

    def interval(self, z: float = 3.0):
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def _summarise(values, seed, excluded=0, bias_bound=0.0) -> McEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return McEstimate(math.nan, math.nan, 0, seed, excluded, bias_bound)
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return McEstimate(mean, se, n, seed, excluded, bias_bound)


# ---------------------------------------------------------------------------
# Walker paths

def sample_walks(params: ModelParams, horizon: float, rng, n: int, start=None, offset: int = 0) -> list:
    """``n`` independent rate-``kappa`` walks; walk ``i`` uses child key ``offset + i``."""
    stream = _as_stream(rng)
    d = params.d
    start = np.zeros(d, np.int64) if start is None else np.asarray(start, np.int64).reshape(d)
    keys = stream.keys(np.arange(offset, offset + n))
    ptr, times, steps = sample_jumps(keys, params.kappa, horizon, d)
    return [WalkPath(start, times[ptr[i]:ptr[i + 1]], steps[ptr[i]:ptr[i + 1]], horizon)
            for i in range(n)]


def sample_walk(params: ModelParams, horizon: float, rng, index: int = 0, start=None) -> WalkPath:
    """Rate-``kappa`` simple random walk on ``[0, horizon]``; ``kappa = 0`` is constant."""
    return sample_walks(params, horizon, rng, 1, start, offset=index)[0]


# ---------------------------------------------------------------------------
# Monte Carlo

def _score(integral, gamma):
    if math.isinf(gamma):
        return (integral == 0).astype(float)
    return np.exp(-gamma * integral)


def quenched_survival_mc(field: TrapFieldRealization, params: ModelParams | None, t: float, n: int,
                         rng, max_exclusion: float = 0.01) -> McEstimate:
    """Average of ``exp(-gamma int_0^t xi(s, X(s)) ds)`` over ``n`` walks.

    Walks that leave the field's observation box are excluded and counted;
    each contributes at most ``1/n`` to the bias, which is added to
    ``bias_bound`` together with the field truncation probability.
    """
    params = field.params if params is None else params
    stream = _as_stream(rng)
    seed = stream.provenance()
    if t > field.horizon:
        raise OutOfWindowError(f"horizon {t} beyond the field horizon {field.horizon}")
    if params.gamma == 0 or t == 0:
        return McEstimate(1.0, 0.0, n, seed)
    if params.kappa == 0:
        path = WalkPath.constant(np.zeros(params.d, np.int64), t)
        val = float(_score(np.array([field.integrate_along_path(path, 0.0, t)]), params.gamma)[0])
        return McEstimate(val, 0.0, n, seed, 0, field.config.epsilon_window)
    box = field.config.obs_radius
    vals, excluded = [], 0
    for path in sample_walks(params, t, stream, n):
        if path.max_distance() > box:
            excluded += 1
            continue
        vals.append(field.integrate_along_path(path, 0.0, t))
    if excluded > max_exclusion * n:
        raise OutOfWindowError(f"{excluded} of {n} walks left the observation box; enlarge obs_radius")
    scores = _score(np.asarray(vals), params.gamma)
    return _summarise(scores, seed, excluded, excluded / n + field.config.epsilon_window)


def _walk_box(params, t, eps=1e-9):
    if params.kappa == 0:
        return 0
    return certified_radius(params.kappa, t, params.d, eps)


def _pinned_field_values(params, t, seed, epsilon_window, indices):
    """Quenched values of the pinned walker for a block of field replicates."""
    cfg = TrapFieldConfig(params, 0, t, epsilon_window, seed)
    _, (owner, start, ptr, times, steps) = sample_fields_batch(cfg, indices)
    M = start.shape[0]
    pos_after = np.zeros((0, params.d), np.int64)
    if steps.shape[0]:
        own = np.repeat(np.arange(M), np.diff(ptr))
        cs = np.cumsum(steps, axis=0)
        cs_pad = np.vstack([np.zeros((1, params.d), np.int64), cs])
        pos_after = start[own] + cs - cs_pad[ptr[own]]
    origin = np.zeros((1, params.d), np.int64)
    occ = kernels.path_overlaps(ptr, times, start, pos_after, np.arange(M, dtype=np.int64),
                                np.zeros(0), origin, 0.0, t)
    per_field = np.bincount(owner, weights=occ, minlength=len(indices))
    return _score(per_field, params.gamma)


def _field_values(params, t, seed, epsilon_window, n_paths, obs_radius, indices):
    out = np.empty(len(indices))
    excluded = 0
    for k, i in enumerate(indices):
        cfg = TrapFieldConfig(params, obs_radius, t, epsilon_window, seed)
        f = sample_field(cfg, stream=int(i))
        est = quenched_survival_mc(f, params, t, n_paths, CounterStream(seed, 1, int(i)), max_exclusion=1.0)
        out[k] = est.mean
        excluded += est.excluded
    return out, excluded


def annealed_survival_mc(params: ModelParams, t: float, n_fields: int, n_paths: int, rng,
                         workers: int = 1, block: int = 1000, epsilon_window: float = 1e-9,
                         max_exclusion: float = 0.01) -> McEstimate:
    """Average over ``n_fields`` fresh fields of the quenched estimate.

    Field ``i`` is stream ``i`` of the seed; its walks come from the child
    stream ``(1, i)``. The standard error is the between-field one.
    """
    stream = _as_stream(rng)
    seed = stream.seed
    prov = stream.provenance()
    if t == 0 or params.gamma == 0:
        return McEstimate(1.0, 0.0, n_fields, prov)
    blocks = [np.arange(a, min(a + block, n_fields)) for a in range(0, n_fields, block)]
    if params.kappa == 0:
        jobs = [(_pinned_field_values, (params, t, seed, epsilon_window, b)) for b in blocks]
    else:
        box = _walk_box(params, t)
        jobs = [(_field_values, (params, t, seed, epsilon_window, n_paths, box, b)) for b in blocks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_call, jobs))
    else:
        results = [_call(j) for j in jobs]
    if params.kappa == 0:
        values, excluded = np.concatenate(results), 0
    else:
        values = np.concatenate([r[0] for r in results])
        excluded = sum(r[1] for r in results)
    total = n_fields * (n_paths if params.kappa > 0 else 1)
    if excluded > max_exclusion * total:
        raise OutOfWindowError(f"{excluded} of {total} walks left the observation box")
    return _summarise(values, prov, excluded, excluded / total + epsilon_window)


def _call(job):
    fn, args = job
    return fn(*args)


# ---------------------------------------------------------------------------
# PAM solver

@dataclass(frozen=True, eq=False)
class PamGrid:
    """Solution snapshots ``u(t_k, .)`` on the box ``[-R, R]^d``.

    ``values[k] * exp(log_scale[k])`` is the solution; the scale keeps the
    stored arrays in floating range for long horizons.
    """

    box_radius: int
    step: float
    times: np.ndarray
    values: np.ndarray
    log_scale: np.ndarray
    time_order: str
    boundary_loss_bound: float
    boundary: str = "absorbing"
    log_mass: np.ndarray = dc_field(default=None)  # log of the total mass at each step time
    step_times: np.ndarray = dc_field(default=None)

    def solution(self, k: int = -1) -> np.ndarray:
        return self.values[k] * math.exp(self.log_scale[k])

    def at(self, x, k: int = -1) -> float:
        idx = tuple(int(c) + self.box_radius for c in np.atleast_1d(x))
        return float(self.values[k][idx] * math.exp(self.log_scale[k]))

    def log_at(self, x, k: int = -1) -> float:
        idx = tuple(int(c) + self.box_radius for c in np.atleast_1d(x))
        v = self.values[k][idx]
        return math.log(v) + self.log_scale[k] if v > 0 else -math.inf

    def log_total(self, k: int = -1) -> float:
        s = self.values[k].sum()
        return math.log(s) + self.log_scale[k] if s > 0 else -math.inf


def _neighbour_average(u, d):
    out = np.zeros_like(u)
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax], hi[ax] = slice(1, None), slice(None, -1)
        out[tuple(hi)] += u[tuple(lo)]
        out[tuple(lo)] += u[tuple(hi)]
    return out / (2 * d)


def _diffuse(u, weights, d):
    """``sum_k w_k P^k u`` with ``P`` the neighbour average, zero outside the box."""
    acc = weights[0] * u
    v = u
    for w in weights[1:]:
        v = _neighbour_average(v, d)
        acc += w * v
    return acc


def pam_solve(field: TrapFieldRealization, params: ModelParams | None, t: float, box_radius: int,
              h: float, initial="ones", time_order: str = "forward", t0: float = 0.0,
              record_times=None) -> PamGrid:
    """Solve ``du/ds = kappa Delta u - gamma xi u`` on ``[-R, R]^d``, zero outside.

    Potential time is ``t0 + s`` in forward order and ``t0 + t - s`` in
    reversed order. Each step of size ``h`` is a Strang splitting: a half
    step of the potential factor, the diffusion step, another half step.
    The potential factor is ``exp(-gamma int xi)`` with the exact occupation
    integral over the half step (``xi`` is piecewise constant), and the
    diffusion step is the uniformized series ``sum Pois(k; kappa h) P^k``
    truncated at a tail of ``1e-16``.

    ``initial`` is ``"ones"``, ``"delta"`` (unit mass at the origin) or an
    array over the box.
    """
    params = field.params if params is None else params
    if time_order not in ("forward", "reversed"):
        raise ValueError("time_order must be 'forward' or 'reversed'")
    if not h > 0 or not t >= 0:
        raise ValueError("need h > 0 and t >= 0")
    R = int(box_radius)
    if R < 0:
        raise ValueError("box radius must be non-negative")
    if R > field.config.obs_radius:
        raise OutOfWindowError(f"box radius {R} exceeds the observation radius {field.config.obs_radius}")
    if t0 < 0 or t0 + t > field.horizon * (1 + 1e-12):
        raise OutOfWindowError("time interval outside the field horizon")
    d = params.d
    shape = (2 * R + 1,) * d
    if isinstance(initial, str):
        if initial == "ones":
            u = np.ones(shape)
        elif initial == "delta":
            u = np.zeros(shape)
            u[(R,) * d] = 1.0
        else:
            raise ValueError(f"unknown initial condition {initial!r}")
    else:
        u = np.array(initial, dtype=float).reshape(shape)
        if np.any(u < 0):
            raise ValueError("initial data must be non-negative")

    N = max(1, int(math.ceil(t / h - 1e-9))) if t > 0 else 0
    step = t / N if N else h
    s_half = np.arange(2 * N + 1) * (step / 2)
    real = t0 + s_half if time_order == "forward" else t0 + t - s_half
    if N:
        occ = field.cumulative_occupation(np.sort(real), R)
        if time_order == "reversed":
            occ = occ[::-1]
        dO = np.abs(np.diff(occ, axis=0))  # occupation over each half step
    gamma = params.gamma
    if N and math.isinf(gamma):
        factors = (dO == 0).astype(float)
    elif N:
        factors = np.exp(-gamma * dO)

    kh = params.kappa * step
    if kh > 0:
        K = int(stats.poisson.isf(1e-16, kh)) + 2
        weights = stats.poisson.pmf(np.arange(K), kh)
    else:
        weights = np.ones(1)

    rec = np.array([t] if record_times is None else record_times, dtype=float)
    rec_idx = np.rint(rec / step).astype(int) if N else np.zeros(rec.size, int)
    if N and np.any(np.abs(rec_idx * step - rec) > 1e-9 * max(1.0, t)):
        raise ValueError("record times must be multiples of the step")
    if np.any((rec_idx < 0) | (rec_idx > N)):
        raise ValueError("record times outside [0, t]")

    snaps, scales = {}, {}
    log_mass = np.empty(N + 1)
    log_scale = 0.0

    def record(n):
        tot = u.sum()
        log_mass[n] = math.log(tot) + log_scale if tot > 0 else -math.inf
        if n in wanted:
            snaps[n] = u.copy()
            scales[n] = log_scale

    wanted = set(rec_idx.tolist())
    record(0)
    for n in range(N):
        u *= factors[2 * n]
        if kh > 0:
            u = _diffuse(u, weights, d)
        u *= factors[2 * n + 1]
        m = u.max()
        if m > 0:
            u /= m
            log_scale += math.log(m)
        record(n + 1)

    values = np.stack([snaps[i] for i in rec_idx])
    scale = np.array([scales[i] for i in rec_idx])
    loss = exit_probability_bound(np.zeros(d, np.int64), R, params.kappa, t, d) if params.kappa > 0 else 0.0
    return PamGrid(R, step, rec, values, scale, time_order, min(1.0, loss), "absorbing",
                   log_mass, np.arange(N + 1) * step)


def quenched_log_survival_pde(field: TrapFieldRealization, params: ModelParams | None, t: float,
                              box_radius: int | None = None, h: float = 0.05, t0: float = 0.0):
    """``log Z`` at every step time from one forward run with unit mass at the
    origin. Returns (step_times, log_Z, boundary_loss_bound)."""
    params = field.params if params is None else params
    R = field.config.obs_radius if box_radius is None else box_radius
    g = pam_solve(field, params, t, R, h, initial="delta", time_order="forward", t0=t0)
    return g.step_times, g.log_mass, g.boundary_loss_bound


def quenched_survival_pde(field: TrapFieldRealization, params: ModelParams | None, t: float,
                          box_radius: int | None = None, h: float = 0.05) -> float:
    """Quenched survival ``Z`` from the PAM solver (a lower bound up to the
    splitting error; absorbed mass is lost)."""
    _, lz, _ = quenched_log_survival_pde(field, params, t, box_radius, h)
    return math.exp(lz[-1])


# ---------------------------------------------------------------------------
# Quenched Lyapunov tables

@dataclass(frozen=True)
class LyapunovRow:
    t: float
    estimate: float
    stderr: float
    n: int
    envelope: float  # gamma nu + kappa
    within_envelope: bool
    positive: bool


def _quenched_rates(params, horizons, seed, h, box, epsilon_window, indices):
    T = float(horizons[-1])
    out = np.empty((len(indices), len(horizons)))
    for k, i in enumerate(indices):
        f = sample_field(TrapFieldConfig(params, box, T, epsilon_window, seed), stream=int(i))
        times, lz, _ = quenched_log_survival_pde(f, params, T, box, h)
        out[k] = -np.interp(horizons, times, lz) / horizons
    return out


def lyapunov_quenched_estimate(params: ModelParams, horizons, replicates: int, h: float = 0.05,
                               seed: int = 0, box_radius: int | None = None, workers: int = 1,
                               epsilon_window: float = 1e-9) -> list:
    """Per-horizon ``-t^{-1} log Z`` over independent fields.

    One PDE run per field up to the largest horizon yields every horizon
    (the total mass of the forward solution is ``Z`` at each step time).
    Horizons should be multiples of ``h``.
    """
    horizons = np.asarray(horizons, dtype=float)
    if horizons.size == 0 or np.any(np.diff(horizons) <= 0) or horizons[0] <= 0:
        raise ValueError("horizons must be positive and increasing")
    if math.isinf(params.gamma):
        raise ValueError("hard traps kill with positive probability; Lyapunov table needs finite gamma")
    T = float(horizons[-1])
    box = _walk_box(params, T) if box_radius is None else int(box_radius)
    per = max(1, replicates // max(1, workers))
    blocks = [np.arange(a, min(a + per, replicates)) for a in range(0, replicates, per)]
    jobs = [(_quenched_rates, (params, horizons, seed, h, box, epsilon_window, b)) for b in blocks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_call, jobs))
    else:
        results = [_call(j) for j in jobs]
    rates = np.vstack(results)
    env = params.gamma * params.nu + params.kappa
    rows = []
    for j, t in enumerate(horizons):
        est = _summarise(rates[:, j], {"seed": seed})
        rows.append(LyapunovRow(float(t), est.mean, est.stderr, est.n, env,
                                est.mean <= env + 3 * est.stderr, est.mean - 3 * est.stderr > 0))
    return rows
