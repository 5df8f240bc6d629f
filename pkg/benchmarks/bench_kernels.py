"""Benchmark the compiled reduced-density-matrix accumulation kernel against
the pure-numpy fallback, on workloads shaped like real sweep points.

Usage: python3 benchmarks/bench_kernels.py [--L 12] [--repeats 5]
"""

import argparse
import time

import numpy as np

from spinqcp import kernels
from spinqcp.models import ModelSpec, symmetry_sectors
from spinqcp.thermal import _site_codes, diagonalize, gibbs_state, reduced_state


def bench_kernel_calls(L, repeats, rng):
    """Time both kernel implementations on every symmetry sector of an
    L-site chain, keeping two sites (the sweep hot path)."""
    plan = symmetry_sectors(ModelSpec.xxz(L, 1.0, 2.0))
    cases = []
    for states in plan.indices:
        keep, env = _site_codes(np.asarray(states, dtype=np.int64), [1, 2], L)
        n = len(states)
        vecs = rng.normal(size=(n, n))
        weights = rng.uniform(0.0, 1.0, size=n)
        cases.append((vecs, weights, keep, env, 4))
    timings = {}
    for name, fn in (("numpy", kernels.accumulate_reduced_numpy),
                     ("compiled", kernels.accumulate_reduced_compiled)):
        if name == "compiled" and not kernels.USING_COMPILED:
            continue
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            for case in cases:
                fn(*case)
            best = min(best, time.perf_counter() - t0)
        timings[name] = best
    return timings


def bench_end_to_end(L, repeats):
    """Time a full thermal-state + two-site reduction, the per-grid-point
    work of a sweep (diagonalization excluded: it is shared across kT)."""
    spec = ModelSpec.xxz(L, 1.0, 2.0)
    spectrum = diagonalize(spec)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        ts = gibbs_state(spec, 0.1, spectrum=spectrum)
        reduced_state(ts, (1, 2))
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--L", type=int, default=12, help="chain length")
    parser.add_argument("--repeats", type=int, default=5,
                        help="repetitions; best time is reported")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"L = {args.L}, repeats = {args.repeats}, "
          f"compiled extension available: {kernels.USING_COMPILED}")

    timings = bench_kernel_calls(args.L, args.repeats, rng)
    print(f"kernel (all sectors, 2 kept sites):")
    for name, t in timings.items():
        print(f"  {name:9s} {t * 1e3:9.2f} ms")
    if "compiled" in timings:
        print(f"  speedup   {timings['numpy'] / timings['compiled']:9.2f}x")

    t = bench_end_to_end(args.L, args.repeats)
    print(f"end-to-end gibbs + two-site reduction: {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
