#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import unitailkit._kernels._fallback as fallback

try:
    import unitailkit._kernels._core as core
except ImportError:
    core = None


def random_quads(rng: np.random.Generator, n: int) -> np.ndarray:
    out = np.empty((n, 8))
    made = 0
    while made < n:
        pts = rng.uniform(0, 100, (8, 2))
        hull = fallback.convex_hull(pts)
        if len(hull) >= 4:
            out[made] = np.asarray(hull[:4]).reshape(-1)
            made += 1
    return out


def timeit(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n_quads = 60 if args.quick else 150
    n_points = 20_000 if args.quick else 100_000
    n_cost = 60 if args.quick else 120

    qa = random_quads(rng, n_quads)
    qb = random_quads(rng, n_quads)
    quad = np.array([10.0, 10.0, 90.0, 12.0, 88.0, 90.0, 12.0, 88.0])
    # interior points only: sample inside the inscribed box
    pts = rng.uniform(30, 70, (n_points, 2))
    cost = rng.uniform(-10, 10, (n_cost, n_cost))

    workloads = [
        (f"batch_quad_iou {n_quads}x{n_quads}", lambda impl: impl.batch_quad_iou(qa, qb)),
        (f"batch_centerness {n_points}", lambda impl: impl.batch_centerness(pts, quad)),
        (f"hungarian {n_cost}x{n_cost}", lambda impl: impl.hungarian(cost)),
    ]

    header = f"{'workload':<28} {'python':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, fn in workloads:
        t_py = timeit(lambda: fn(fallback))
        if core is not None:
            t_cy = timeit(lambda: fn(core))
            print(f"{name:<28} {t_py * 1e3:>8.1f}ms {t_cy * 1e3:>8.1f}ms {t_py / t_cy:>7.1f}x")
        else:
            print(f"{name:<28} {t_py * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>8}")
    if core is None:
        print("\ncompiled core not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
