"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from paratrend import _kernels_py

try:
    from paratrend import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    T = 1000
    pts = np.arange(1, T + 1) / T
    E = rng.standard_normal((100, 3000))
    eps = rng.choice([-1.0, 1.0], size=(200, 1064))
    rho = 0.2 - 0.3 * np.arange(1, 1001) / 1000
    return {
        "local_linear_weights T=1000 b=0.1": lambda m: m.local_linear_weights(T, 0.1, pts, 0, 1.0),
        "lagged_products 100x3000 K=45": lambda m: m.lagged_products(E, 45),
        "ma_filter 200x1000 J=64": lambda m: m.ma_filter(eps, rho, 64),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:38s} {tp:11.2f} {'n/a':>12s} {'':>8s}")
            continue
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        a, b = fn(_kernels_py), fn(_ckernels)
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:38s} {tp:11.2f} {tc:12.2f} {tp / tc:7.1f}x  (max abs diff {diff:.1e})")


if __name__ == "__main__":
    main()
