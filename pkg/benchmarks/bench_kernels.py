#!/usr/bin/env python3
"""Benchmark the numba and numpy kernel backends against each other.

Times the two hot kernels (LCS table construction and batched Dice
similarity) on synthetic workloads sized like real version-pair runs,
checks that both backends produce identical outputs, and prints a
comparison table.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from driftlens import kernels


def time_best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def lcs_workloads(rng):
    # (name, a, b): small edit on a big file, medium divergence, unrelated pair
    base = rng.integers(0, 5000, size=2000).astype(np.int64)
    edited = base.copy()
    edited[990:1010] = rng.integers(5000, 6000, size=20)
    medium_a = rng.integers(0, 400, size=800).astype(np.int64)
    medium_b = rng.integers(0, 400, size=800).astype(np.int64)
    unrelated_a = rng.integers(0, 1000, size=600).astype(np.int64)
    unrelated_b = rng.integers(1000, 2000, size=600).astype(np.int64)
    return [
        ("lcs small-edit 2000x2000", base, edited),
        ("lcs medium 800x800", medium_a, medium_b),
        ("lcs unrelated 600x600", unrelated_a, unrelated_b),
    ]


def dice_workload(rng, files=2000, lines=300):
    sets = [np.unique(rng.integers(0, 10**7, size=lines).astype(np.int64))
            for _ in range(files)]
    flat, offsets = kernels.pack_line_sets(sets)
    query = np.unique(rng.integers(0, 10**7, size=lines).astype(np.int64))
    return query, flat, offsets


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    if "numba" not in backends:
        print("numba unavailable; nothing to compare")
        return

    rng = np.random.default_rng(1234)
    rows = []

    lcs_np, dice_np = kernels.get_impl("numpy")
    lcs_nb, dice_nb = kernels.get_impl("numba")

    for name, a, b in lcs_workloads(rng):
        want = lcs_np(a, b)
        got = lcs_nb(a, b)  # first call also pays any JIT cost
        np.testing.assert_array_equal(want, got)
        t_np = time_best(lambda: lcs_np(a, b), args.repeat)
        t_nb = time_best(lambda: lcs_nb(a, b), args.repeat)
        rows.append((name, t_np, t_nb))

    query, flat, offsets = dice_workload(rng)
    np.testing.assert_array_equal(dice_np(query, flat, offsets),
                                  dice_nb(query, flat, offsets))
    t_np = time_best(lambda: dice_np(query, flat, offsets), args.repeat)
    t_nb = time_best(lambda: dice_nb(query, flat, offsets), args.repeat)
    rows.append(("dice 1x2000 files", t_np, t_nb))

    print(f"\n{'workload':<28}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>9}")
    for name, t1, t2 in rows:
        print(f"{name:<28}{t1 * 1e3:>12.2f}{t2 * 1e3:>12.2f}{t1 / t2:>9.2f}x")
    print("\noutputs identical across backends")


if __name__ == "__main__":
    main()
