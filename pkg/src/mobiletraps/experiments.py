"""
Experiment definitions behind the command line.

Each command maps an :class:`ExperimentConfig` to a table of rows plus an
optional pass/fail verdict. Everything here is deterministic given the
config (seed included); wall-clock time only enters the metadata sidecar.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .lattice_kernels import (ModelParams, certified_radius, green_function, hat_v0, laplace_p,
                              lclt_approx, transition_prob)
from .lyapunov_shape import shape_profile, subadditivity_annealed_check, triangle_check
from .rng import CounterStream
from .pascal_discrete import (DiscretePath, LazyWalkKernel, all_step_paths, brute_force_oracle,
                              expected_range, pascal_check)
from .survival_mc import (annealed_survival_mc, lyapunov_quenched_estimate, pam_solve,
                          quenched_log_survival_pde, quenched_survival_mc, sample_walks)
from .trap_field import (TrapFieldConfig, reversal_covariance, sample_field, site_count_gof)
from .volterra_annealed import (annealed_exponent_pinned, solve_hitting,
                                solve_m_along_path, solve_v0)

@dataclass
class ExperimentConfig:
    """Everything a command needs; ``seed`` has no default on purpose."""

    command: str
    seed: int
    params: ModelParams = field(default_factory=ModelParams)
    horizons: list | None = None
    h: float | None = None
    box_radius: int | None = None
    replicates: int | None = None
    paths: int | None = None
    workers: int = 1
    gammas: list | None = None
    steps: int | None = None
    qs: list | None = None
    speeds: list | None = None
    sample_paths: int | None = None
    tolerances: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is required")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["params"] = self.params.as_dict()
        out.pop("output")
        out["gammas"] = None if self.gammas is None else [_gamma_repr(g) for g in self.gammas]
        return out

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def tol(self, name, default):
        return float(self.tolerances.get(name, default))


def _gamma_repr(g):
    return "inf" if math.isinf(g) else float(g)


@dataclass
class ResultRecord:
    command: str
    config_digest: str
    columns: list
    rows: list
    verdict: bool | None
    notes: list
    version: str = __version__
    timestamp: float = 0.0
    config: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(row.get(c, "")) for c in self.columns])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"command": self.command, "config_digest": self.config_digest, "version": self.version,
                "timestamp": self.timestamp, "verdict": self.verdict, "notes": self.notes,
                "config": self.config, "kernel_backend": kernels.backend()}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


# ---------------------------------------------------------------------------
# annealed-exact

def _default_h(tmax):
    return max(0.1, tmax / 40000)


def _exact_curve(params, horizons, h):
    """(-log E[Z], v_0 or phi(., e_1), error estimate) at each horizon."""
    T = float(max(horizons))
    if params.hard_traps:
        sol = solve_hitting(T, params, snapshot_times=[])
        ex = np.array([sol.exponent(t, params.nu) for t in horizons])
        v = np.array([sol.phi_e1(t) for t in horizons])
        return ex, v, np.zeros(len(horizons))
    fine = solve_v0(T, h, params)
    coarse = solve_v0(T, 2 * fine.step, params)
    ex = params.nu * params.gamma * np.interp(horizons, fine.times, fine.running_integral)
    exc = params.nu * params.gamma * np.interp(horizons, coarse.times, coarse.running_integral)
    v = np.interp(horizons, fine.times, fine.m_values)
    return ex, v, np.abs(ex - exc) / 3


def cmd_annealed_exact(cfg: ExperimentConfig):
    p = cfg.params
    if p.kappa != 0:
        raise ValueError("annealed-exact needs kappa = 0 (exact pinned pipeline)")
    if cfg.sample_paths:
        return _continuous_pascal(cfg)
    horizons = cfg.horizons or [1e2, 1e3, 1e4]
    gammas = cfg.gammas or [p.gamma]
    h = cfg.h or _default_h(max(horizons))
    rows, notes = [], []
    G = green_function(p.d) if p.d >= 3 else None
    ratios, taubs = {}, {}
    for g in gammas:
        q = p.replace(gamma=g)
        ex, v, err = _exact_curve(q, horizons, h)
        for t, e, vv, er in zip(horizons, ex, v, err):
            row = dict(gamma=_gamma_repr(g), t=t, neg_log_survival=e, rate=e / t, v0=vv, error_estimate=er)
            if p.d == 1:
                row["ratio"] = e / (q.nu * math.sqrt(8 * q.rho * t / math.pi))
                row["tauberian"] = (vv * math.sqrt(math.pi * q.rho * t / 2) if q.hard_traps
                                    else vv * g * math.sqrt(math.pi * t / (2 * q.rho)))
            elif p.d >= 3:
                lam = q.nu * q.rho / G if q.hard_traps else q.nu * g * q.rho / (q.rho + g * G)
                row["ratio"] = (e / t) / lam
                row["tauberian"] = vv * G if q.hard_traps else vv * (q.rho + g * G) / q.rho
            else:
                row["ratio"] = ""
                row["tauberian"] = ""
            ratios.setdefault(g, []).append(row["ratio"])
            taubs.setdefault(g, []).append(row["tauberian"])
            rows.append(row)
    verdict = None
    tol = cfg.tol("relative", 0.05)
    if p.d == 1:
        last = [r[-1] for r in ratios.values()]
        gaps = [[abs(x - 1) for x in r] for r in ratios.values()]
        spread = (max(last) - min(last)) / np.mean(last)
        verdict = (all(abs(x - 1) <= tol for x in last) and spread <= tol
                   and all(np.all(np.diff(gp) < 0) for gp in gaps)
                   and all(abs(r[-1] - 1) <= tol for r in taubs.values()))
        notes.append(f"spread of the d=1 ratio across gamma at t={max(horizons)}: {spread:.4g}")
    elif p.d >= 3:
        verdict = (all(abs(r[-1] - 1) <= tol for r in ratios.values())
                   and all(abs(r[-1] - 1) <= cfg.tol("v0", 0.01) for r in taubs.values()))
    else:
        notes.append("d=2: the t/log t constants are not reproducible at desk horizons; "
                     "rates are reported for qualitative monotonicity only")
        verdict = None
    cols = ["gamma", "t", "neg_log_survival", "rate", "ratio", "v0", "tauberian", "error_estimate"]
    return cols, rows, verdict, notes


def _continuous_pascal(cfg):
    """Path-conditioned survival for sampled rate-kappa paths against the
    pinned value; ``params.kappa`` is the pinned model, the paths use
    ``tolerances['path_kappa']`` (default 1)."""
    p = cfg.params
    t = float((cfg.horizons or [10.0])[-1])
    h = cfg.h or 0.05
    kappa_path = cfg.tol("path_kappa", 1.0)
    paths = sample_walks(p.replace(kappa=kappa_path), t, cfg.seed, cfg.sample_paths)
    pinned = solve_v0(t, h, p)
    pinned2 = solve_v0(t, h / 2, p)
    pin_val = math.exp(-pinned2.exponent)
    solver_tol = abs(pinned.exponent - pinned2.exponent)
    rows = []
    for i, path in enumerate(paths):
        sol = solve_m_along_path(path, t, h / 2, p)
        val = math.exp(-sol.exponent)
        bound = pin_val * (1 + 5 * solver_tol)
        rows.append(dict(path_id=i, n_jumps=path.n_jumps, given_path=val, pinned=pin_val,
                         ratio=val / pin_val, bound=bound, holds=val <= bound))
    verdict = all(r["holds"] for r in rows)
    notes = [f"solver tolerance (step-halving change of the pinned exponent): {solver_tol:.3g}"]
    return ["path_id", "n_jumps", "given_path", "pinned", "ratio", "bound", "holds"], rows, verdict, notes


# ---------------------------------------------------------------------------
# Monte Carlo commands

def cmd_annealed_mc(cfg):
    p = cfg.params
    horizons = cfg.horizons or [10.0]
    n_fields = cfg.replicates or 10000
    n_paths = cfg.paths or 1
    rows = []
    ok = True
    for t in horizons:
        est = annealed_survival_mc(p, t, n_fields, n_paths, cfg.seed, workers=cfg.workers)
        row = dict(kind="annealed", t=t, estimate=est.mean, stderr=est.stderr, n=est.n, seed=cfg.seed)
        exact = math.exp(-annealed_exponent_pinned(t, cfg.h or 0.01, p.replace(kappa=0.0)))
        row["reference"] = exact
        row["z"] = (est.mean - exact) / est.stderr if est.stderr > 0 else 0.0
        row["holds"] = abs(row["z"]) <= 3 if p.kappa == 0 else est.mean <= exact + 3 * est.stderr
        ok &= row["holds"]
        rows.append(row)
    # shared-field comparison of the two quenched estimators
    q = p if p.kappa > 0 else p.replace(kappa=1.0)
    t = float(horizons[-1])
    est, pde = _shared_field(q, t, cfg)
    z = (est.mean - pde) / est.stderr if est.stderr > 0 else 0.0
    rows.append(dict(kind="quenched_shared_field", t=t, estimate=est.mean, stderr=est.stderr, n=est.n,
                     seed=cfg.seed, reference=pde, z=z, holds=abs(z) <= 3))
    ok &= abs(z) <= 3
    cols = ["kind", "t", "estimate", "stderr", "n", "seed", "reference", "z", "holds"]
    return cols, rows, bool(ok), ["annealed reference: exact pinned Volterra value (Pascal bound if kappa > 0)",
                                  "shared-field reference: PAM solver on the same field"]


def _shared_field(params, t, cfg):
    box = cfg.box_radius or certified_radius(params.kappa, t, params.d, 1e-9)
    f = sample_field(TrapFieldConfig(params, box, t, 1e-9, cfg.seed), stream=0)
    est = quenched_survival_mc(f, params, t, cfg.paths or 10000, cfg.seed)
    pde = math.exp(quenched_log_survival_pde(f, params, t, box, cfg.h or 0.025)[1][-1])
    return est, pde


def cmd_quenched_mc(cfg):
    p = cfg.params
    t = float((cfg.horizons or [10.0])[-1])
    rows, ok = [], True
    for rep in range(cfg.replicates or 1):
        box = cfg.box_radius or certified_radius(max(p.kappa, 1e-12), t, p.d, 1e-9)
        f = sample_field(TrapFieldConfig(p, box, t, 1e-9, cfg.seed), stream=rep)
        est = quenched_survival_mc(f, p, t, cfg.paths or 10000, CounterStream(cfg.seed, 2, rep))
        pde = math.exp(quenched_log_survival_pde(f, p, t, box, cfg.h or 0.025)[1][-1]) \
            if not p.hard_traps else ""
        z = (est.mean - pde) / est.stderr if pde != "" and est.stderr > 0 else ""
        holds = True if z == "" else abs(z) <= 3
        ok &= holds
        rows.append(dict(replicate=rep, t=t, estimate=est.mean, stderr=est.stderr, n=est.n,
                         excluded=est.excluded, bias_bound=est.bias_bound, pde=pde, z=z, holds=holds))
    cols = ["replicate", "t", "estimate", "stderr", "n", "excluded", "bias_bound", "pde", "z", "holds"]
    return cols, rows, bool(ok), []


def cmd_quenched_pde(cfg):
    p = cfg.params
    horizons = np.asarray(cfg.horizons or [10.0], float)
    T = float(horizons[-1])
    h = cfg.h or 0.05
    box = cfg.box_radius or certified_radius(max(p.kappa, 1e-12), T, p.d, 1e-9)
    rows = []
    for rep in range(cfg.replicates or 1):
        f = sample_field(TrapFieldConfig(p, box, T, 1e-9, cfg.seed), stream=rep)
        times, lz, loss = quenched_log_survival_pde(f, p, T, box, h)
        lz_t = np.interp(horizons, times, lz)
        # unit initial data with forward potential: same law as Z (reversibility)
        g = pam_solve(f, p, T, box, h, initial="ones", time_order="forward")
        u0 = g.log_at((0,) * p.d)
        for t, v in zip(horizons, lz_t):
            rows.append(dict(replicate=rep, t=t, log_Z=v, Z=math.exp(v), boundary_loss_bound=loss,
                             log_u_forward=u0 if t == T else ""))
    cols = ["replicate", "t", "log_Z", "Z", "boundary_loss_bound", "log_u_forward"]
    return cols, rows, None, ["log_u_forward: log u(T,0) with unit initial data and forward-time potential"]


def cmd_lyapunov_table(cfg):
    p = cfg.params
    horizons = cfg.horizons or [10.0, 20.0, 50.0]
    reps = cfg.replicates or 20
    table = lyapunov_quenched_estimate(p, horizons, reps, h=cfg.h or 0.05, seed=cfg.seed,
                                       box_radius=cfg.box_radius, workers=cfg.workers)
    rows = [r._asdict() if hasattr(r, "_asdict") else dataclasses.asdict(r) for r in table]
    verdict = all(r["within_envelope"] for r in rows) and rows[-1]["positive"]
    cols = ["t", "estimate", "stderr", "n", "envelope", "within_envelope", "positive"]
    return cols, rows, bool(verdict), []


# ---------------------------------------------------------------------------
# discrete Pascal

def _lazy_kernel(cfg):
    stay = cfg.tol("stay", 0.5)
    return LazyWalkKernel.simple(cfg.params.d, stay)


def cmd_pascal_sweep(cfg):
    n = cfg.steps or 5
    qs = cfg.qs or [0.3, 1.0]
    k = _lazy_kernel(cfg)
    oracle = n <= 6
    rows, ok = [], True
    for pid, (seq, path) in enumerate(all_step_paths(n)):
        for q in qs:
            for m in range(n + 1):
                v = pascal_check(k, path, m, q)
                diff = abs(float(brute_force_oracle(k, path, m, q)) - v.s_path) if oracle else ""
                good = v.holds and (diff == "" or diff <= 1e-12)
                ok &= good
                rows.append(dict(path_id=pid, steps="".join("+0-"[1 - s] for s in seq), n=m, q=q,
                                 S_path=v.s_path, S_zero=v.s_zero, margin=v.margin, oracle_diff=diff,
                                 holds=good))
    cols = ["path_id", "steps", "n", "q", "S_path", "S_zero", "margin", "oracle_diff", "holds"]
    return cols, rows, bool(ok), []


def cmd_range_sweep(cfg):
    n = cfg.steps or 5
    k = _lazy_kernel(cfg)
    rows, ok = [], True
    base = [expected_range(k, DiscretePath.zero(n), m) for m in range(n + 1)]
    hand = base[1] if n >= 1 else None
    for pid, (seq, path) in enumerate(all_step_paths(n)):
        for m in range(n + 1):
            r = expected_range(k, path, m)
            good = r >= base[m] - 1e-12
            ok &= good
            rows.append(dict(path_id=pid, steps="".join("+0-"[1 - s] for s in seq), n=m,
                             range_path=r, range_zero=base[m], margin=r - base[m], holds=good))
    notes = []
    if hand is not None and cfg.tol("stay", 0.5) == 0.5:
        notes.append(f"E|R_1| for the pinned path: {hand!r} (hand value 1.5)")
        ok &= abs(hand - 1.5) <= 1e-12
    return ["path_id", "steps", "n", "range_path", "range_zero", "margin", "holds"], rows, bool(ok), notes


# ---------------------------------------------------------------------------
# hitting

def cmd_hitting(cfg):
    p = cfg.params.replace(gamma=math.inf)
    horizons = cfg.horizons or ([1e2, 1e3, 1e4] if p.d == 1 else [100.0, 500.0])
    T = float(max(horizons))
    tol = cfg.tol("box", 1e-10)
    sol = solve_hitting(T, p, cfg.box_radius, tol, snapshot_times=[])
    rows = []
    G = green_function(p.d) if p.d >= 3 else None
    for t in horizons:
        phi = float(sol.phi_e1(t))
        e = sol.exponent(t, p.nu)
        if p.d == 1:
            scaled = phi * math.sqrt(math.pi * p.rho * t / 2)
            ratio = e / (p.nu * math.sqrt(8 * p.rho * t / math.pi))
        elif p.d >= 3:
            scaled = phi * G
            ratio = (e / t) / (p.nu * p.rho / G)
        else:
            scaled = ratio = ""
        rows.append(dict(t=t, phi_e1=phi, scaled_phi=scaled, neg_log_survival=e, ratio=ratio,
                         box_radius=sol.box_radius, exit_bound=sol.exit_bound))
    verdict = None
    if p.d == 1:
        verdict = abs(rows[-1]["scaled_phi"] - 1) <= cfg.tol("relative", 0.05)
    elif p.d >= 3:
        verdict = abs(rows[-1]["scaled_phi"] - 1) <= cfg.tol("relative", 0.02)
    cols = ["t", "phi_e1", "scaled_phi", "neg_log_survival", "ratio", "box_radius", "exit_bound"]
    return cols, rows, verdict, ["scaled_phi: phi*sqrt(pi rho t/2) in d=1, phi*G_d(0) in d>=3"]


# ---------------------------------------------------------------------------
# shape and triangle

def cmd_shape_profile(cfg):
    p = cfg.params
    t = float((cfg.horizons or [20.0])[-1])
    speeds = cfg.speeds or list(np.round(np.linspace(-1, 1, 9), 10))
    box = cfg.box_radius or max(int(math.ceil(max(map(abs, speeds)) * t)) + 1,
                                certified_radius(max(p.kappa, 1e-12), t, p.d, 1e-9))
    rows = []
    for rep in range(cfg.replicates or 1):
        f = sample_field(TrapFieldConfig(p, box, t, 1e-9, cfg.seed), stream=rep)
        prof = shape_profile(f, p, t, speeds, box, cfg.h or 0.05)
        res = np.concatenate([[np.nan], prof.convexity_residuals, [np.nan]]) if len(speeds) >= 3 \
            else np.full(len(speeds), np.nan)
        for v, y, a, r in zip(prof.speeds, prof.targets, prof.values, res):
            rows.append(dict(replicate=rep, speed=v, target=int(y), value=a,
                             convexity_residual="" if np.isnan(r) else r))
    return ["replicate", "speed", "target", "value", "convexity_residual"], rows, None, []


def cmd_triangle_check(cfg):
    p = cfg.params
    n = cfg.replicates or 50
    h = cfg.h or 0.05
    T = float((cfg.horizons or [10.0])[-1])
    box = cfg.box_radius or certified_radius(max(p.kappa, 1e-12), T, p.d, 1e-9) + 5
    rng = np.random.default_rng(cfg.seed)  # instance layout only; fields use counter streams
    grid = np.arange(0, int(round(T / h)) + 1) * h
    rows, ok = [], True
    for i in range(n):
        f = sample_field(TrapFieldConfig(p, box, T, 1e-9, cfg.seed), stream=i)
        t1, t2, t3 = np.sort(rng.choice(grid, 3, replace=False))
        xs = rng.integers(-3, 4, size=(3, p.d))
        m = triangle_check(f, p, t1, t2, t3, xs[0], xs[1], xs[2], box, h)
        ok &= m.holds
        rows.append(dict(kind="triangle", instance=i, t1=t1, t2=t2, t3=t3,
                         x1=_pt(xs[0]), x2=_pt(xs[1]), x3=_pt(xs[2]), margin=m.margin,
                         tolerance=m.tolerance, holds=m.holds))
    grid_t = [1.0, 2.0, 5.0, 10.0]
    for s in subadditivity_annealed_check(p.replace(kappa=0.0), [0.0] + grid_t, grid_t):
        ok &= s.holds
        rows.append(dict(kind="subadditivity", instance="", t1=s.t1, t2=s.t2, t3=s.t1 + s.t2,
                         margin=s.margin, tolerance=s.slack, holds=s.holds))
    cols = ["kind", "instance", "t1", "t2", "t3", "x1", "x2", "x3", "margin", "tolerance", "holds"]
    return cols, rows, bool(ok), ["triangle: margin >= -5*tolerance; subadditivity: margin >= -tolerance"]


def _pt(x):
    return " ".join(str(int(c)) for c in np.atleast_1d(x))


# ---------------------------------------------------------------------------
# self tests and field laws

def cmd_kernels_selftest(cfg):
    rows = []

    def add(name, value, reference, tol, rel=True):
        err = abs(value - reference) / abs(reference) if rel else abs(value - reference)
        rows.append(dict(check=name, value=value, reference=reference, error=err, tolerance=tol,
                         holds=bool(err <= tol)))

    add("G_3(0)", green_function(3), 1.5163860591519780, 1e-9)
    for lam in (0.1, 1.0, 5.0):
        add(f"p_hat d=1 lambda={lam}", laplace_p(lam, 1), 1 / math.sqrt(lam * lam + 2 * lam), 1e-8)
    # Laplace closure: trapezoid transform of v_0 against the closed form
    p = ModelParams(d=1, gamma=1.0, rho=1.0)
    T, h = 60.0, 0.005
    sol = solve_v0(T, h, p)
    for lam in (0.5, 1.0, 2.0):
        w = np.exp(-lam * sol.times)
        num = np.trapezoid(w * sol.m_values, sol.times) if hasattr(np, "trapezoid") \
            else np.trapz(w * sol.m_values, sol.times)
        add(f"Laplace closure lambda={lam}", num, hat_v0(lam, p), cfg.tol("closure", 1e-4))
    # local CLT on t=200, |x| <= 100
    x = np.arange(-100, 101)
    ratio = np.array([lclt_approx(200.0, np.array([xi]), 1.0, 1) for xi in x]) \
        / transition_prob(200.0, x[:, None], 1.0, 1)
    worst = float(ratio[np.argmax(np.abs(ratio - 1))])
    add("LCLT worst ratio t=200 |x|<=100", worst, 1.0, cfg.tol("lclt", 0.05))
    verdict = all(r["holds"] for r in rows)
    return ["check", "value", "reference", "error", "tolerance", "holds"], rows, verdict, \
        [f"kernel backend: {kernels.backend()}"]


def cmd_field_laws(cfg):
    p = cfg.params
    T = float((cfg.horizons or [10.0])[-1])
    box = cfg.box_radius or 50
    conf = TrapFieldConfig(p, box, T, 1e-9, cfg.seed)
    n_gof = cfg.replicates or 200
    rows, ok = [], True
    for g in site_count_gof(conf, range(n_gof), alpha=cfg.tol("alpha", 0.01)):
        ok &= g.passes
        rows.append(dict(check="chi_square", t=g.t, statistic=g.statistic, pvalue=g.pvalue,
                         n=g.n_sites, holds=g.passes))
    cov_conf = TrapFieldConfig(p, 2, T, 1e-9, cfg.seed + 1)
    x = np.zeros(p.d, np.int64)
    y = x.copy()
    y[0] = 1
    rc = reversal_covariance(cov_conf, x, y, range(cfg.paths or 20000))
    ok &= rc.within
    rows.append(dict(check="reversal_covariance", t=T, statistic=rc.difference, pvalue="",
                     n=cfg.paths or 20000, holds=rc.within, forward=rc.forward, backward=rc.backward,
                     stderr=rc.stderr))
    cols = ["check", "t", "statistic", "pvalue", "n", "forward", "backward", "stderr", "holds"]
    return cols, rows, bool(ok), ["chi-square against Poisson(nu) at t = 0, T/2, T; covariance uses seed+1"]


COMMANDS = {
    "annealed-exact": cmd_annealed_exact,
    "annealed-mc": cmd_annealed_mc,
    "quenched-mc": cmd_quenched_mc,
    "quenched-pde": cmd_quenched_pde,
    "pascal-sweep": cmd_pascal_sweep,
    "range-sweep": cmd_range_sweep,
    "hitting": cmd_hitting,
    "lyapunov-table": cmd_lyapunov_table,
    "shape-profile": cmd_shape_profile,
    "triangle-check": cmd_triangle_check,
    "kernels-selftest": cmd_kernels_selftest,
    "field-laws": cmd_field_laws,
}

# acceptance criterion -> command that reproduces it
CRITERIA = {
    1: "annealed-exact", 2: "annealed-exact", 3: "annealed-exact", 4: "kernels-selftest",
    5: "annealed-exact", 6: "pascal-sweep", 7: "range-sweep", 8: "annealed-exact",
    9: "annealed-mc", 10: "lyapunov-table", 11: "kernels-selftest", 12: "triangle-check",
    13: "field-laws",
}


def run(cfg: ExperimentConfig) -> ResultRecord:
    try:
        fn = COMMANDS[cfg.command]
    except KeyError:
        raise KeyError(f"unknown command {cfg.command!r}") from None
    cols, rows, verdict, notes = fn(cfg)
    return ResultRecord(cfg.command, cfg.digest(), cols, rows, verdict, notes,
                        timestamp=time.time(), config=cfg.as_dict())


def write_result(rec: ResultRecord, path) -> None:
    """CSV at ``path`` and the metadata sidecar at ``path + '.meta.json'``."""
    with open(path, "w", newline="") as fh:
        fh.write(rec.csv_text())
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(rec.metadata(), fh, indent=2, sort_keys=True, default=str)
