#!/usr/bin/env python3
"""Time the pairwise hot loops: compiled extension vs NumPy fallback.

Usage: python benchmarks/bench_backends.py [--repeat 5]

The derivative kernel is the inner loop of every integration step, so the
per-call time here bounds the whole tool's throughput.
"""

import argparse
import time

import numpy as np

from switchflock import pairwise
from switchflock.kernels import rational_kernel


def time_call(fn, *args, repeat=5, min_loops=3):
    best = float("inf")
    for _ in range(repeat):
        loops = min_loops
        t0 = time.perf_counter()
        for _ in range(loops):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / loops)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not pairwise.compiled_available():
        print("compiled backend not built; nothing to compare")
        return

    fam = rational_kernel().fast
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'d':>3} {'pure (us)':>12} {'compiled (us)':>14} {'speedup':>9}")
    for n in (4, 8, 16, 32, 64, 128, 256, 512):
        for d in (2, 3):
            x = rng.uniform(-1, 1, (n, d))
            v = rng.uniform(-1, 1, (n, d))
            pairwise.use("pure")
            t_pure = time_call(pairwise.coupling_deriv, x, v, 1.0, *fam,
                               repeat=args.repeat)
            pairwise.use("compiled")
            t_comp = time_call(pairwise.coupling_deriv, x, v, 1.0, *fam,
                               repeat=args.repeat)
            # agreement sanity while we are at it
            pairwise.use("pure")
            a = pairwise.coupling_deriv(x, v, 1.0, *fam)[0]
            pairwise.use("compiled")
            b = pairwise.coupling_deriv(x, v, 1.0, *fam)[0]
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
            print(f"{n:>6} {d:>3} {t_pure*1e6:>12.2f} {t_comp*1e6:>14.2f} "
                  f"{t_pure/t_comp:>9.2f}x")
    pairwise.use("compiled")


if __name__ == "__main__":
    main()
