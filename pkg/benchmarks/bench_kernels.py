"""Benchmark: compiled action-assembly kernels vs the pure-numpy fallback.

Run as a script:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from evanflow import _kernels_py

try:
    from evanflow import _kernels
except ImportError:
    _kernels = None


def bench(fn, args, repeat=2000):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6  # microseconds


def main():
    rng = np.random.default_rng(0)
    rows = []
    for m, n in [(241, 1), (241, 2), (481, 4), (2001, 8)]:
        W = rng.normal(size=(m, n))
        Vv = rng.random(m)
        Vg = rng.normal(size=(m, n))
        ts = np.linspace(0.0, 12.0, m)
        vals = rng.random(m)
        cases = [
            ("action_assemble", (W, Vv, Vg, 0.05, 0.5, True)),
            ("el_residual_max", (W, Vg, 0.05)),
            ("trapezoid", (ts, vals)),
        ]
        for name, args in cases:
            py_us = bench(getattr(_kernels_py, name), args)
            if _kernels is not None:
                cy_us = bench(getattr(_kernels, name), args)
                rows.append((f"{name} m={m} n={n}", py_us, cy_us, py_us / cy_us))
            else:
                rows.append((f"{name} m={m} n={n}", py_us, float("nan"), float("nan")))

    header = f"{'kernel':34s} {'python us':>10s} {'compiled us':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, py_us, cy_us, speedup in rows:
        print(f"{label:34s} {py_us:10.2f} {cy_us:12.2f} {speedup:8.2f}")
    if _kernels is None:
        print("\ncompiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
