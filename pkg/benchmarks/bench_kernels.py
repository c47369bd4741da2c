"""Compare the numba and pure-numpy paths of the hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20] [--size 262144]

Prints the best-of-repeat wall time per kernel for both paths and the
maximum absolute difference between their outputs. The numba path is timed
after a warm-up call so compilation is excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fdecon import _accel


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size: int):
    rng = np.random.default_rng(0)
    key = _accel.stream_key(12345, 0)
    counters = np.arange(size, dtype=np.uint64)
    values = rng.normal(size=size) + 1j * rng.normal(size=size)
    period = 1 << max(1, int(np.log2(size)) - 2)
    residues = np.mod(np.arange(size) - size // 2, period)
    coeffs = rng.normal(size=size)
    L = int(np.ceil(np.log(size)))
    return {
        "counter_normals": lambda impl: impl.counter_normals(key, counters),
        "fold_bins": lambda impl: impl.fold_bins(values, residues, period),
        "block_energies": lambda impl: impl.block_energies(coeffs, L),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--size", type=int, default=1 << 18)
    args = parser.parse_args(argv)

    if _accel.numba_impl is None:
        print("numba is not importable; only the numpy path is available")
        return 1
    print(f"size={args.size} repeat={args.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, run in cases(args.size).items():
        ref = run(_accel.numpy_impl)
        out = run(_accel.numba_impl)  # warm-up compiles
        t_np = best_time(lambda: run(_accel.numpy_impl), args.repeat)
        t_nb = best_time(lambda: run(_accel.numba_impl), args.repeat)
        diff = float(np.max(np.abs(np.asarray(ref) - np.asarray(out))))
        print(f"{name:<18}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}{diff:>14.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
