"""
Compare the compiled and numpy kernel backends on the two hot loops.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one line per (kernel, size, backend) with the best wall time and
checks that both backends return the same numbers.
"""
import argparse
import time

import numpy as np
from scipy import special

from mobiletraps import kernels
from mobiletraps.lattice_kernels import ModelParams
from mobiletraps.paths import WalkPath
from mobiletraps.trap_field import TrapFieldConfig, sample_field


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_volterra(N, repeat):
    K = special.ive(0, np.arange(N + 1) * 0.1) ** 1
    res = {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        res[name] = best_of(lambda: kernels.conv_volterra(K, 0.1), repeat)
    return res


def bench_overlaps(obs, n_paths, repeat):
    p = ModelParams(d=1, kappa=1.0)
    field = sample_field(TrapFieldConfig(p, obs, 10.0, seed=1))
    rng = np.random.default_rng(0)
    paths = []
    for _ in range(n_paths):
        n = rng.poisson(10)
        times = np.sort(rng.uniform(0, 10, n))
        steps = rng.choice([-1, 1], size=(n, 1))
        paths.append(WalkPath([0], times, steps, 10.0))
    res = {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        res[name] = best_of(lambda: np.array([field.integrate_along_path(q, 0, 10) for q in paths]), repeat)
    return res


def report(label, res):
    ref = None
    for name, (t, out) in sorted(res.items()):
        if ref is None:
            ref = out
        agree = np.allclose(out, ref, rtol=1e-12, atol=1e-12)
        print(f"{label:28s} {name:7s} {t * 1e3:10.2f} ms   agree={agree}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"backends: {kernels.available_backends()}")
    for N in (2000, 8000):
        report(f"conv_volterra N={N}", bench_volterra(N, args.repeat))
    for obs, n in ((30, 200), (60, 1000)):
        report(f"path_overlaps R={obs} paths={n}", bench_overlaps(obs, n, args.repeat))
    kernels.use_backend(kernels.available_backends()[0])


if __name__ == "__main__":
    main()
