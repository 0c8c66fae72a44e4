"""Benchmark the compiled kernel extension against the NumPy fallback.

Runs the two hot kernels (pairwise transport distance, pairwise rotated
overlap) on identical random inputs for every importable backend and
prints a throughput table with the compiled/python speedup.

Usage: python benchmarks/bench_kernels.py [--repeats 5] [--seed 0]
"""

import argparse
import time

import numpy as np

from ssodlab.kernels import available_backends


def random_boxes(rng: np.random.Generator, n: int, span: float) -> np.ndarray:
    """Random (cx, cy, w, h, theta) rows clustered so overlaps are common."""
    out = np.empty((n, 5), dtype=np.float64)
    out[:, 0:2] = rng.uniform(0.0, span, (n, 2))
    out[:, 2:4] = rng.uniform(4.0, 48.0, (n, 2))
    out[:, 4] = rng.uniform(-np.pi / 2, np.pi / 2, n)
    return out


def best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case, best is kept")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = [
        ("wd_sq_matrix", "16x65472", random_boxes(rng, 16, 1024.0),
         random_boxes(rng, 65472, 1024.0)),
        ("wd_sq_matrix", "256x4096", random_boxes(rng, 256, 512.0),
         random_boxes(rng, 4096, 512.0)),
        ("rotated_iou_matrix", "150x150 dense", random_boxes(rng, 150, 200.0),
         random_boxes(rng, 150, 200.0)),
        ("rotated_iou_matrix", "512x64 sparse", random_boxes(rng, 512, 2048.0),
         random_boxes(rng, 64, 2048.0)),
    ]

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'kernel':<20} {'case':<16}"
    for name in backends:
        header += f" {name + ' (s)':>14}"
    if len(backends) > 1:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for kernel, label, a, b in cases:
        pairs = a.shape[0] * b.shape[0]
        times = {}
        for name, module in backends.items():
            fn = getattr(module, kernel)
            fn(a[:2], b[:2])  # warm up
            times[name] = best_time(lambda: fn(a, b), args.repeats)
        row = f"{kernel:<20} {label:<16}"
        for name in backends:
            row += f" {times[name]:>14.4f}"
        if "compiled" in times and "python" in times:
            row += f" {times['python'] / times['compiled']:>8.1f}x"
        print(row)
        rates = ", ".join(f"{name} {pairs / t / 1e6:.1f}M pairs/s"
                          for name, t in times.items())
        print(f"{'':<37} {rates}")


if __name__ == "__main__":
    main()
