#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the fused Bessel kernel (the per-iteration hot spot) over a range of
batch sizes and orders, then times complete EM fits under each backend.
Run from the repository root:

    python benchmarks/bench_backends.py [--sizes 100 10000 1000000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from laplace_mle import kernels, matsl, mvsl, simstudy


def _best_of(repeat: int, fn) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(sizes, repeat):
    print("\nfused Bessel kernel (log K, up-ratio), seconds per call")
    print(f"{'size':>9} {'order':>6} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for size in sizes:
        x = rng.uniform(0.05, 50.0, size)
        for two_m in (0, 13, 28):
            times = {}
            for backend in ("numpy", "numba"):
                kernels.use_backend(backend)
                kernels.kv_log_and_up_ratio(two_m, x)  # warm up / compile
                times[backend] = _best_of(
                    repeat, lambda: kernels.kv_log_and_up_ratio(two_m, x)
                )
            print(
                f"{size:>9} {two_m / 2:>6.1f} {times['numpy']:>12.3e} "
                f"{times['numba']:>12.3e} {times['numpy'] / times['numba']:>7.1f}x"
            )


def bench_fits(repeat):
    print("\ncomplete EM fits, seconds per fit")
    print(f"{'fit':>24} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    case_m = simstudy.builtin_case("matsl-case1")
    case_v = simstudy.builtin_case("mvsl-case3")
    data_m = matsl.sample(case_m.sigma1, case_m.sigma2, 100, seed=11)
    data_v = mvsl.sample(case_v.sigma, 200, seed=12)
    jobs = [
        ("matsl p=5 q=3 N=100", lambda: matsl.em_fit(data_m)),
        ("mvsl p=6 N=200", lambda: mvsl.em_fit(data_v)),
    ]
    for label, job in jobs:
        times = {}
        for backend in ("numpy", "numba"):
            kernels.use_backend(backend)
            job()  # warm up / compile
            times[backend] = _best_of(repeat, job)
        print(
            f"{label:>24} {times['numpy']:>12.3e} {times['numba']:>12.3e} "
            f"{times['numpy'] / times['numba']:>7.1f}x"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 10_000, 1_000_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    initial = kernels.backend()
    try:
        bench_kernel(args.sizes, args.repeat)
        bench_fits(args.repeat)
    finally:
        kernels.use_backend(initial)


if __name__ == "__main__":
    main()
