import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mobiletraps import kernels, rng
from mobiletraps.lattice_kernels import ModelParams
from mobiletraps.paths import WalkPath
from mobiletraps.trap_field import TrapFieldConfig, sample_field


# -- counter-based streams --------------------------------------------------

def test_uniform_range_and_determinism():
    s = rng.CounterStream(42, 1, 2)
    u = s.uniform(np.arange(100_000))
    assert np.all((u > 0) & (u < 1))
    assert np.array_equal(u, rng.CounterStream(42, 1, 2).uniform(np.arange(100_000)))
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_order_independence():
    s = rng.CounterStream(9)
    idx = np.arange(1000)
    perm = np.random.default_rng(0).permutation(1000)
    assert np.array_equal(s.uniform(idx)[perm], s.uniform(idx[perm]))
    k = s.keys(50)
    assert np.array_equal(k[[3, 7]], s.keys([3, 7]))


def test_children_differ():
    a = rng.CounterStream(1).child(0).uniform(np.arange(10))
    b = rng.CounterStream(1).child(1).uniform(np.arange(10))
    c = rng.CounterStream(2).child(0).uniform(np.arange(10))
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert rng.CounterStream(1).child(0).provenance() == {"seed": 1, "path": [0]}


def test_zigzag_bijective():
    c = np.arange(-500, 501)
    z = rng.zigzag(c)
    assert sorted(z.tolist()) == list(range(1001))


@pytest.mark.parametrize("mean", [0.3, 1.0, 10.0, 1e4])
def test_poisson_inversion_matches_ppf(mean):
    key = rng.seed_key(3)
    u = rng.uniform(key, np.arange(50_000))
    assert np.array_equal(rng.poisson(key, np.arange(50_000), mean), stats.poisson.ppf(u, mean).astype(np.int64))


def test_poisson_vector_means_and_zero():
    key = rng.seed_key(4)
    means = np.array([0.0, 2.0, 5.0])
    draws = rng.poisson(np.full(3, key), 0, means)
    assert draws[0] == 0
    assert np.all(rng.poisson(key, np.arange(10), 0.0) == 0)


# -- backends ---------------------------------------------------------------

@pytest.fixture
def restore_backend():
    name = kernels.backend()
    yield
    kernels.use_backend(name)


def test_backend_selection(restore_backend):
    assert "python" in kernels.available_backends()
    kernels.use_backend("python")
    assert kernels.backend() == "python"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def _all_backends(fn):
    out = {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        out[name] = fn()
    return out


@given(N=st.integers(1, 300), gh=st.floats(0.001, 2.0))
@settings(max_examples=30, deadline=None)
def test_conv_volterra_backends_agree(N, gh):
    name = kernels.backend()
    K = np.exp(-np.arange(N + 1) * 0.05)
    res = _all_backends(lambda: kernels.conv_volterra(K, gh))
    kernels.use_backend(name)
    vals = list(res.values())
    for v in vals[1:]:
        np.testing.assert_allclose(v, vals[0], rtol=1e-13, atol=1e-15)


def test_conv_volterra_constant_kernel():
    # K = 1: m' = -g m, so m = exp(-g t); trapezoid gives ((1 - gh/2)/(1 + gh/2))^n
    gh = 0.01
    m = kernels.conv_volterra(np.ones(101), gh)
    assert m[-1] == pytest.approx(((1 - gh / 2) / (1 + gh / 2)) ** 100, rel=1e-12)


@given(stream=st.integers(0, 200))
@settings(max_examples=25, deadline=None)
def test_path_overlaps_backends_agree(stream):
    name = kernels.backend()
    f = sample_field(TrapFieldConfig(ModelParams(d=2, rho=2.0), 4, 5.0, 1e-8, 3), stream)
    gen = np.random.default_rng(stream)
    n = gen.poisson(6)
    times = np.sort(gen.uniform(0, 5, n))
    steps = np.zeros((n, 2), np.int64)
    steps[np.arange(n), gen.integers(0, 2, n)] = gen.choice([-1, 1], n)
    path = WalkPath([0, 0], times, steps, 5.0)
    if path.max_distance() > 4:
        path = WalkPath.constant([0, 0], 5.0)
    res = _all_backends(lambda: f.trap_overlaps(path, 0.7, 4.2))
    kernels.use_backend(name)
    vals = list(res.values())
    for v in vals[1:]:
        np.testing.assert_allclose(v, vals[0], rtol=0, atol=1e-13)
