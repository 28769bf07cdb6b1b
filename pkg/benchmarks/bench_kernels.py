"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--events N] [--cities K] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from edcpatrol import _kernels_py

try:
    from edcpatrol import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None


def visit_case(n, seed=0):
    rng = np.random.default_rng(seed)
    tau, T = 14.5, 120.0
    offsets = np.sort(rng.uniform(0, tau, (12, 2)), axis=1)
    vidx = rng.integers(0, 12, n)
    ts = rng.uniform(0, 1e6, n)
    tf = ts + rng.exponential(75.0, n)
    return vidx, ts, tf, offsets, tau, T, 1e-9 * T


def tsp_case(k, seed=0):
    pts = np.random.default_rng(seed).random((k, 2))
    return np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))


def bench(label, fn, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {label:<8} {best * 1e3:10.2f} ms")
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=1_000_000)
    ap.add_argument("--cities", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", _kernels_py)] + ([("cython", _kernels_cy)] if _kernels_cy else [])
    if _kernels_cy is None:
        print("compiled extension not built; timing the fallback only")

    case = visit_case(args.events)
    print(f"visit_outcomes, {args.events} events, 2 robots")
    t = {name: bench(name, lambda m=mod: m.visit_outcomes(*case), args.repeat) for name, mod in backends}
    if len(t) == 2:
        print(f"  speedup  {t['python'] / t['cython']:10.1f}x")

    d = tsp_case(args.cities)
    print(f"held_karp, {args.cities} cities")
    t = {name: bench(name, lambda m=mod: m.held_karp(d), args.repeat) for name, mod in backends}
    if len(t) == 2:
        print(f"  speedup  {t['python'] / t['cython']:10.1f}x")


if __name__ == "__main__":
    main()
