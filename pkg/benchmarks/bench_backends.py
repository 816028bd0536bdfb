#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallbacks.

Runs each hot kernel on representative workloads under both backends and
prints a timing table with speedups. Usage:

    python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import importlib.util
import time

import numpy as np

from lidd._core import pykernels

HAVE_COMPILED = importlib.util.find_spec("lidd._core.ckernels") is not None
if HAVE_COMPILED:
    from lidd._core import ckernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng):
    frames = {}
    for label, (T, N) in {
        "T=2880 N=12": (2880, 12),
        "T=2880 N=32": (2880, 32),
        "T=20000 N=12": (20000, 12),
    }.items():
        values = np.ascontiguousarray(rng.normal(size=(T, N)))
        mask = np.ascontiguousarray((rng.random((T, N)) >= 0.1).astype(np.uint8))
        frames[label] = (values, mask)

    matrices = {}
    for n in (50, 200, 500):
        a = rng.uniform(0.01, 1.0, size=(n, n))
        d = np.ascontiguousarray((a + a.T) / 2)
        np.fill_diagonal(d, 0.0)
        matrices[f"n={n}"] = d

    cases = []
    for label, (values, mask) in frames.items():
        cases.append(
            (f"pearson_pairs {label}",
             lambda m, v=values, k=mask: m.pearson_pairs(v, k, 24))
        )
    for label, (values, mask) in frames.items():
        cases.append(
            (f"rolling_median w=5 {label}",
             lambda m, v=values, k=mask: m.rolling_median_masked(v, k, 5))
        )
    for label, d in matrices.items():
        cases.append(
            (f"nn_chain average {label}", lambda m, x=d: m.nn_chain(x, 0))
        )
    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = workloads(rng)

    name_w = max(len(name) for name, _ in cases)
    header = f"{'kernel / workload'.ljust(name_w)}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py = timeit(lambda: call(pykernels), args.repeats)
        if HAVE_COMPILED:
            t_c = timeit(lambda: call(ckernels), args.repeats)
            speed = t_py / t_c if t_c > 0 else float("inf")
            print(f"{name.ljust(name_w)}  {t_py * 1e3:9.2f}ms  {t_c * 1e3:9.2f}ms  {speed:7.1f}x")
        else:
            print(f"{name.ljust(name_w)}  {t_py * 1e3:9.2f}ms  {'n/a':>10}  {'n/a':>8}")
    if not HAVE_COMPILED:
        print("\ncompiled backend unavailable; install with a C toolchain to compare.")


if __name__ == "__main__":
    main()
