import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobiletraps.lattice_kernels import ModelParams, transition_prob
from mobiletraps.paths import WalkPath
from mobiletraps.rng import CounterStream
from mobiletraps.survival_mc import (McEstimate, annealed_survival_mc, lyapunov_quenched_estimate,
                                     pam_solve, quenched_log_survival_pde, quenched_survival_mc,
                                     quenched_survival_pde, sample_walk, sample_walks)
from mobiletraps.trap_field import (OutOfWindowError, TrapFieldConfig, TrapFieldRealization,
                                    integrate_along_path, sample_field)
from mobiletraps.volterra_annealed import annealed_survival_pinned

P = ModelParams(d=1, gamma=1.0, nu=1.0, rho=1.0, kappa=1.0)


def field(params=P, obs=12, T=5.0, seed=3, stream=0):
    return sample_field(TrapFieldConfig(params, obs, T, 1e-9, seed), stream)


def empty_field(params=P, obs=12, T=5.0):
    return TrapFieldRealization.from_trajectories(TrapFieldConfig(params, obs, T, 1e-9, 0), [])


# -- walks ------------------------------------------------------------------

def test_walk_basics():
    assert sample_walk(P.replace(kappa=0.0), 5.0, 1).n_jumps == 0
    a, b = sample_walk(P, 5.0, 7, index=3), sample_walk(P, 5.0, 7, index=3)
    assert np.array_equal(a.jump_times, b.jump_times) and np.array_equal(a.steps, b.steps)
    walks = sample_walks(P.replace(kappa=2.0), 3.0, 11, 10_000)
    n = np.array([w.n_jumps for w in walks])
    assert abs(n.mean() - 6.0) <= 3 * math.sqrt(6.0 / n.size)


def test_walk_offsets_select_children():
    ws = sample_walks(P, 4.0, 5, 6)
    assert np.array_equal(sample_walks(P, 4.0, 5, 3, offset=3)[1].jump_times, ws[4].jump_times)


def test_walk_displacement_law():
    ws = sample_walks(ModelParams(d=2, kappa=1.0), 4.0, 2, 20_000)
    end = np.array([w.positions[-1] for w in ws])
    # E|X_t|^2 = kappa t
    sq = (end ** 2).sum(axis=1)
    assert abs(sq.mean() - 4.0) <= 3 * sq.std() / math.sqrt(sq.size)


# -- quenched MC ------------------------------------------------------------

def test_quenched_trivial_cases():
    f = field()
    assert quenched_survival_mc(f, P.replace(gamma=0.0), 5.0, 100, 1).mean == 1.0
    assert quenched_survival_mc(f, P, 0.0, 100, 1).mean == 1.0
    e = quenched_survival_mc(empty_field(), P, 5.0, 200, 1)
    assert e.mean == 1.0 and e.stderr == 0.0


def test_quenched_pinned_exact():
    f = field(P.replace(kappa=0.0))
    est = quenched_survival_mc(f, P.replace(kappa=0.0), 5.0, 50, 1)
    exact = math.exp(-integrate_along_path(f, WalkPath.constant([0], 5.0), 0.0, 5.0))
    assert est.mean == exact and est.stderr == 0.0


def test_quenched_determinism_and_interval():
    f = field()
    a = quenched_survival_mc(f, P, 5.0, 500, 9)
    b = quenched_survival_mc(f, P, 5.0, 500, CounterStream(9))
    assert a == b
    lo, hi = a.interval()
    assert lo < a.mean < hi and a.stderr >= 0


def test_quenched_exclusions():
    f = field(obs=1, T=5.0)
    with pytest.raises(OutOfWindowError):
        quenched_survival_mc(f, P, 5.0, 200, 1)
    est = quenched_survival_mc(f, P, 5.0, 200, 1, max_exclusion=1.0)
    assert est.excluded > 0 and est.bias_bound >= est.excluded / 200
    with pytest.raises(OutOfWindowError):
        quenched_survival_mc(f, P, 6.0, 10, 1)


def test_hard_trap_mc_scores_indicators():
    p = P.replace(gamma=math.inf)
    est = quenched_survival_mc(field(p), p, 5.0, 400, 2)
    assert 0 <= est.mean <= 1
    assert est.mean * 400 == pytest.approx(round(est.mean * 400), abs=1e-9)


# -- annealed MC ------------------------------------------------------------

def test_annealed_zero_time():
    assert annealed_survival_mc(P, 0.0, 10, 1, 1).mean == 1.0


def test_annealed_pinned_matches_volterra():
    p = P.replace(kappa=0.0)
    est = annealed_survival_mc(p, 3.0, 5000, 1, 4)
    assert abs(est.mean - annealed_survival_pinned(3.0, 0.005, p)) <= 3 * est.stderr


def test_annealed_moving_below_pinned():
    est = annealed_survival_mc(P, 3.0, 300, 20, 4)
    assert est.mean <= annealed_survival_pinned(3.0, 0.005, P.replace(kappa=0.0)) + 3 * est.stderr


def test_worker_count_does_not_change_estimate():
    a = annealed_survival_mc(P.replace(kappa=0.0), 2.0, 900, 1, 8, workers=1, block=200)
    b = annealed_survival_mc(P.replace(kappa=0.0), 2.0, 900, 1, 8, workers=3, block=200)
    c = annealed_survival_mc(P.replace(kappa=0.0), 2.0, 900, 1, 8, workers=1, block=900)
    assert a.mean == b.mean == c.mean and a.stderr == b.stderr == c.stderr
    d = annealed_survival_mc(P, 2.0, 40, 5, 8, workers=1, block=10)
    e = annealed_survival_mc(P, 2.0, 40, 5, 8, workers=2, block=10)
    assert d == e


# -- PAM solver -------------------------------------------------------------

def test_pam_gamma_zero_is_one():
    f = field()
    g = pam_solve(f, P.replace(gamma=0.0), 2.0, 12, 0.1)
    u = g.solution()
    assert np.allclose(u[12 - 3:12 + 4], 1.0, atol=1e-9)
    assert np.all(u <= 1 + 1e-12) and np.all(u >= 0)


def test_pam_kappa_zero_is_exact():
    p = P.replace(kappa=0.0)
    f = field(p)
    g = pam_solve(f, p, 5.0, 6, 0.37)
    for x in range(-6, 7):
        exact = math.exp(-integrate_along_path(f, WalkPath.constant([x], 5.0), 0.0, 5.0))
        assert g.at([x]) == pytest.approx(exact, abs=1e-10)


def test_pam_empty_field_is_heat_kernel():
    p = ModelParams(d=2, kappa=1.0)
    f = empty_field(p, obs=12, T=3.0)
    g = pam_solve(f, p, 3.0, 12, 0.1, initial="delta")
    for y in ([0, 0], [1, 0], [2, -1], [3, 3]):
        assert g.at(y) == pytest.approx(transition_prob(3.0, y, 1.0, 2), abs=1e-10 + g.boundary_loss_bound)


def test_pam_error_is_order_h_squared():
    # trap jumps make the potential discontinuous in time, so the error is
    # O(h^2) with a coefficient that depends on where jumps fall in a step;
    # ratios under halving are irregular, the bound and the fitted order are not
    hs = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    for stream in range(3):
        f = field(stream=stream)
        ref = quenched_log_survival_pde(f, P, 4.0, 12, 0.4 / 256)[1][-1]
        err = np.array([abs(quenched_log_survival_pde(f, P, 4.0, 12, h)[1][-1] - ref) for h in hs])
        assert np.all(err <= hs ** 2)
        assert np.polyfit(np.log(hs), np.log(err), 1)[0] >= 1.4


def test_pde_monotone_and_matches_reversed():
    f = field()
    times, lz, loss = quenched_log_survival_pde(f, P, 5.0, 12, 0.05)
    assert np.all(np.diff(lz) <= 1e-12) and lz[0] == 0.0
    g = pam_solve(f, P, 5.0, 12, 0.05, initial="ones", time_order="reversed")
    assert g.log_at([0]) == pytest.approx(lz[-1], abs=1e-10)
    e = quenched_survival_pde(empty_field(), P, 5.0, 12, 0.05)
    assert 1 - 2 * loss - 1e-12 <= e <= 1 + 1e-12


def test_pde_matches_mc_on_shared_field():
    f = field(T=5.0, stream=2)
    est = quenched_survival_mc(f, P, 5.0, 20_000, 6)
    pde = quenched_survival_pde(f, P, 5.0, 12, 0.025)
    assert abs(est.mean - pde) <= 3 * est.stderr


def test_forward_and_reversed_agree_in_mean():
    fw, rv = [], []
    for i in range(200):
        f = field(T=4.0, seed=21, stream=i)
        fw.append(pam_solve(f, P, 4.0, 12, 0.1, initial="ones", time_order="forward").at([0]))
        rv.append(pam_solve(f, P, 4.0, 12, 0.1, initial="ones", time_order="reversed").at([0]))
    diff = np.array(fw) - np.array(rv)
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(diff.size)


def test_jensen_direction():
    z = np.array([quenched_survival_pde(field(T=3.0, seed=4, stream=i), P, 3.0, 12, 0.1) for i in range(30)])
    assert math.fsum(np.log(z)) / z.size <= math.log(math.fsum(z) / z.size)


def test_hard_trap_pde_zeroes_occupied_sites():
    p = P.replace(gamma=math.inf, kappa=0.0)
    f = field(p)
    g = pam_solve(f, p, 5.0, 6, 0.1)
    for x in range(-6, 7):
        occ = integrate_along_path(f, WalkPath.constant([x], 5.0), 0.0, 5.0)
        assert g.at([x]) == (0.0 if occ > 0 else 1.0)


def test_pam_errors():
    f = field(obs=4)
    with pytest.raises(OutOfWindowError):
        pam_solve(f, P, 1.0, 5, 0.1)
    with pytest.raises(OutOfWindowError):
        pam_solve(f, P, 6.0, 4, 0.1)
    with pytest.raises(ValueError):
        pam_solve(f, P, 1.0, 4, 0.0)
    with pytest.raises(ValueError):
        pam_solve(f, P, 1.0, 4, 0.1, time_order="sideways")
    with pytest.raises(ValueError):
        pam_solve(f, P, 1.0, 4, 0.1, record_times=[0.33])


def test_long_horizon_log_scale():
    p = ModelParams(d=1, gamma=5.0, nu=3.0, kappa=1.0)
    f = field(p, obs=30, T=60.0)
    times, lz, _ = quenched_log_survival_pde(f, p, 60.0, 30, 0.1)
    assert np.isfinite(lz[-1]) and lz[-1] < -300


# -- Lyapunov tables --------------------------------------------------------

def test_lyapunov_table_envelope():
    rows = lyapunov_quenched_estimate(P, [5.0, 10.0], 8, h=0.1, seed=3)
    assert [r.t for r in rows] == [5.0, 10.0]
    assert all(r.within_envelope and r.envelope == 2.0 for r in rows)
    small = lyapunov_quenched_estimate(P.replace(gamma=1e-6), [10.0], 4, h=0.1, seed=3)
    assert abs(small[0].estimate) < 1e-4
    with pytest.raises(ValueError):
        lyapunov_quenched_estimate(P, [10.0, 5.0], 2)
    with pytest.raises(ValueError):
        lyapunov_quenched_estimate(P.replace(gamma=math.inf), [5.0], 2)


def test_lyapunov_workers_identical():
    a = lyapunov_quenched_estimate(P, [5.0], 6, h=0.1, seed=5, workers=1)
    b = lyapunov_quenched_estimate(P, [5.0], 6, h=0.1, seed=5, workers=3)
    assert a == b


@given(vals=st.lists(st.floats(0, 1), min_size=2, max_size=50))
@settings(max_examples=50, deadline=None)
def test_summary_order_independent(vals):
    from mobiletraps.survival_mc import _summarise
    a = _summarise(vals, {})
    b = _summarise(vals[::-1], {})
    assert a.mean == b.mean and a.stderr == b.stderr and a.stderr >= 0
