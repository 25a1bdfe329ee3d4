"""
Acceptance gate: the thirteen primary criteria at their stated tolerances.

Each test records one pass/fail line that ``conftest.py`` prints in the
terminal summary. Seeds are fixed here once (pre-registered); no test
retries with a different seed.
"""
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE
from mobiletraps.experiments import ExperimentConfig, run
from mobiletraps.lattice_kernels import ModelParams, green_function, hat_v0, lclt_approx, transition_prob
from mobiletraps.volterra_annealed import solve_v0

SEED = 1
INF = math.inf


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    assert ok, f"criterion {k}: {detail}"


@pytest.fixture(scope="module")
def d1_rows():
    cfg = ExperimentConfig("annealed-exact", seed=SEED, params=ModelParams(d=1, gamma=1.0),
                           horizons=[1e2, 1e3, 1e4], gammas=[0.5, 1.0, 2.0, INF])
    rows = run(cfg).rows
    out = {}
    for r in rows:
        out.setdefault(r["gamma"], []).append(r)
    return out


def test_criterion_01_d1_constant(d1_rows):
    ok, parts = True, []
    for g in (1.0, "inf"):
        rows = d1_rows[g]
        gaps = [abs(r["ratio"] - 1) for r in rows]
        ok &= gaps[-1] <= 0.05 and all(np.diff(gaps) < 0)
        parts.append(f"gamma={g}: ratio(1e4)={rows[-1]['ratio']:.4f}, gaps={[round(float(x), 4) for x in gaps]}")
    record(1, ok, "; ".join(parts))


def test_criterion_02_gamma_independence(d1_rows):
    last = [rows[-1]["ratio"] for rows in d1_rows.values()]
    spread = (max(last) - min(last)) / np.mean(last)
    record(2, spread <= 0.05, f"spread over gamma in {{0.5,1,2,inf}} = {spread:.4f} (<= 0.05)")


def test_criterion_03_d3_lyapunov():
    p = ModelParams(d=3, gamma=1.0, rho=1.0, nu=1.0)
    rows = run(ExperimentConfig("annealed-exact", seed=SEED, params=p, horizons=[500.0], h=0.1)).rows
    G = green_function(3)
    rate = rows[-1]["neg_log_survival"] / 500.0
    rate_err = abs(rate * (1 + G) - 1)
    v0_err = abs(rows[-1]["v0"] * (1 + G) - 1)
    record(3, rate_err <= 0.05 and v0_err <= 0.01,
           f"rate rel err {rate_err:.4f} (<= 0.05), v0(500) rel err {v0_err:.4f} (<= 0.01)")


def test_criterion_04_laplace_closure():
    p = ModelParams(d=1, gamma=1.0, rho=1.0)
    sol = solve_v0(60.0, 0.005, p)
    errs = []
    for lam in (0.5, 1.0, 2.0):
        num = np.trapezoid(np.exp(-lam * sol.times) * sol.m_values, sol.times)
        errs.append(abs(num / hat_v0(lam, p) - 1))
    record(4, max(errs) <= 1e-4, f"max relative error {max(errs):.2e} (<= 1e-4)")


def test_criterion_05_tauberian(d1_rows):
    vals = {g: rows[-1]["tauberian"] for g, rows in d1_rows.items() if g != "inf"}
    ok = all(0.95 <= v <= 1.05 for v in vals.values())
    record(5, ok, "v0*gamma*sqrt(pi t/2 rho) at t=1e4: "
           + ", ".join(f"gamma={g}: {v:.5f}" for g, v in vals.items()))


def test_criterion_06_discrete_pascal():
    rec = run(ExperimentConfig("pascal-sweep", seed=SEED, params=ModelParams(d=1), steps=5, qs=[0.3, 1.0]))
    worst = min(r["margin"] for r in rec.rows)
    diff = max(r["oracle_diff"] for r in rec.rows)
    n_paths = len({r["path_id"] for r in rec.rows})
    ok = rec.verdict and n_paths == 3 ** 5 and worst >= 0 and diff <= 1e-12
    record(6, ok, f"{n_paths} paths, min margin {worst:.3g}, max oracle diff {diff:.2e}")


def test_criterion_07_range():
    rec = run(ExperimentConfig("range-sweep", seed=SEED, params=ModelParams(d=1), steps=5))
    worst = min(r["margin"] for r in rec.rows)
    hand = next(r["range_zero"] for r in rec.rows if r["n"] == 1)
    ok = rec.verdict and worst >= -1e-12 and abs(hand - 1.5) <= 1e-12
    record(7, ok, f"min margin {worst:.3g}, E|R_1| pinned = {hand!r}")


def test_criterion_08_continuous_pascal():
    rec = run(ExperimentConfig("annealed-exact", seed=SEED, params=ModelParams(d=1, gamma=1.0, kappa=0.0),
                               horizons=[10.0], sample_paths=100))
    worst = max(r["ratio"] for r in rec.rows)
    ok = len(rec.rows) == 100 and all(r["holds"] for r in rec.rows)
    record(8, ok, f"100 paths, max given-path/pinned ratio {worst:.6f}")


def test_criterion_09_mc_consistency():
    rec = run(ExperimentConfig("annealed-mc", seed=SEED, params=ModelParams(d=1, gamma=1.0, kappa=0.0),
                               horizons=[10.0], replicates=10000, workers=2))
    z = {r["kind"]: r["z"] for r in rec.rows}
    ok = all(abs(v) <= 3 for v in z.values())
    record(9, ok, f"annealed z = {z['annealed']:.2f}, shared-field z = {z['quenched_shared_field']:.2f}")


def test_criterion_10_quenched_envelope():
    p = ModelParams(d=1, gamma=1.0, nu=1.0, rho=1.0, kappa=1.0)
    rec = run(ExperimentConfig("lyapunov-table", seed=SEED, params=p, horizons=[50.0], replicates=20))
    r = rec.rows[-1]
    ok = r["estimate"] <= 2.0 + 3 * r["stderr"] and r["estimate"] - 3 * r["stderr"] > 0
    record(10, ok, f"estimate {r['estimate']:.4f} +- {r['stderr']:.4f} at t=50 (envelope 2)")


def test_criterion_11_lclt():
    x = np.arange(-100, 101)
    ratio = np.array([lclt_approx(200.0, [xi], 1.0, 1) for xi in x]) / transition_prob(200.0, x[:, None], 1.0, 1)
    ok = bool(np.all((ratio >= 0.95) & (ratio <= 1.05)))
    record(11, ok, f"ratio range [{ratio.min():.5f}, {ratio.max():.5f}]")


def test_criterion_12_triangle_subadditivity():
    p = ModelParams(d=1, gamma=1.0, nu=1.0, rho=1.0, kappa=1.0)
    rec = run(ExperimentConfig("triangle-check", seed=SEED, params=p, replicates=50))
    tri = [r for r in rec.rows if r["kind"] == "triangle"]
    sub = [r for r in rec.rows if r["kind"] == "subadditivity"]
    ok = len(tri) == 50 and all(r["margin"] >= -5 * r["tolerance"] for r in tri) \
        and all(r["margin"] >= -r["tolerance"] for r in sub)
    record(12, ok, f"min triangle margin {min(r['margin'] for r in tri):.3g}, "
                   f"min subadditivity margin {min(r['margin'] for r in sub):.3g}")


def test_criterion_13_field_laws():
    rec = run(ExperimentConfig("field-laws", seed=SEED, params=ModelParams(d=1)))
    chi = [r for r in rec.rows if r["check"] == "chi_square"]
    cov = next(r for r in rec.rows if r["check"] == "reversal_covariance")
    ok = len(chi) == 3 and all(r["pvalue"] >= 0.01 for r in chi) \
        and abs(cov["statistic"]) <= 3 * cov["stderr"]
    record(13, ok, "chi-square p-values " + ", ".join(f"{r['pvalue']:.3f}" for r in chi)
           + f"; covariance difference {cov['statistic']:.2e} (stderr {cov['stderr']:.2e})")
