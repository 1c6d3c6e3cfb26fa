"""Timing comparison of the numpy and Cython kernel backends.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 7] [--inner 20]

Each kernel is timed on the shapes the trainer actually produces (batch x
bank cosine matrices and their backward passes) plus a couple of larger
shapes to show scaling. The reported number is the best-of-repeats mean
time per call; best-of is the standard way to suppress scheduler noise.
A final column verifies both backends agree to 1e-12 (relative) on every
benchmarked shape, so the speedup is never quoted for divergent results.
"""

import argparse
import time

import numpy as np

from unikd.kernels import available_backends, select_backend

CASES = [
    # (label, m queries, n keys, dim)
    ("trainer batch vs bank", 64, 192, 32),
    ("small net batch vs bank", 12, 36, 8),
    ("wide embeddings", 64, 192, 256),
    ("large bank", 128, 1024, 64),
    ("square bulk", 512, 512, 128),
]


def best_mean_seconds(fn, repeats: int, inner: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.abs(a - b).max()) / scale


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--inner", type=int, default=20)
    args = parser.parse_args()

    if "cython" not in available_backends():
        print("compiled backend not built; nothing to compare")
        return 1
    py = select_backend("python")
    cy = select_backend("cython")

    rng = np.random.default_rng(0)
    header = (
        f"{'case':26s} {'kernel':22s} {'python':>10s} {'cython':>10s} "
        f"{'speedup':>8s} {'agree':>6s}"
    )
    print(header)
    print("-" * len(header))
    for label, m, n, d in CASES:
        q = rng.standard_normal((m, d))
        k = rng.standard_normal((n, d))
        w = rng.standard_normal((m, n))
        s = py.pairwise_cosine(q, k)

        kernels = [
            ("pairwise_cosine", lambda b: b.pairwise_cosine(q, k)),
            ("pairwise_cosine_grad", lambda b: b.pairwise_cosine_grad(q, k, s, w)),
            ("diag_cosine_grad", lambda b: b.diag_cosine_grad(q, q[::-1].copy())),
        ]
        for name, call in kernels:
            t_py = best_mean_seconds(lambda: call(py), args.repeats, args.inner)
            t_cy = best_mean_seconds(lambda: call(cy), args.repeats, args.inner)
            out_py = call(py)
            out_cy = call(cy)
            if isinstance(out_py, tuple):
                dev = max(rel_dev(a, b) for a, b in zip(out_py, out_cy))
            else:
                dev = rel_dev(out_py, out_cy)
            agree = "yes" if dev <= 1e-12 else "NO"
            print(
                f"{label:26s} {name:22s} {t_py * 1e6:>8.1f}us {t_cy * 1e6:>8.1f}us "
                f"{t_py / t_cy:>7.2f}x {agree:>6s}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
