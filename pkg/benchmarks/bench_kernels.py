"""Time the numba tree kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 720] [--trees 20] [--repeat 3]

Both backends grow identical trees; the script checks that before timing.
"""

import argparse
import json
import time

import numpy as np

from gfstack import _accel
from gfstack.learners import ExtraTrees, RandomForest, fit_cart
from gfstack.table import SeededRng


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(X, y, trees):
    Q = X[:200]
    rf = RandomForest(trees, 9, rng=SeededRng(0)).fit(X, y)
    return {
        "cart best depth 7": lambda: fit_cart(X, y, 7),
        "cart best depth 13": lambda: fit_cart(X, y, 13),
        "cart random depth 11": lambda: fit_cart(X, y, 11, random_thresholds=True, seed=3),
        f"random forest {trees} trees depth 9": lambda: RandomForest(trees, 9, rng=SeededRng(0)).fit(X, y),
        f"extra trees {trees} trees depth 11": lambda: ExtraTrees(trees, 11, rng=SeededRng(0)).fit(X, y),
        f"forest predict {trees} trees x 200 rows": lambda: rf.predict(Q),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=720)
    ap.add_argument("--features", type=int, default=24)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    g = np.random.default_rng(0)
    X = g.normal(size=(args.rows, args.features))
    y = X[:, 0] + 0.5 * X[:, 1] * X[:, 2] + g.normal(size=args.rows)

    _accel.USE_NUMBA = True
    fast_tree = fit_cart(X, y, 9, random_thresholds=True, seed=1)  # also triggers compilation
    _accel.USE_NUMBA = False
    slow_tree = fit_cart(X, y, 9, random_thresholds=True, seed=1)
    assert json.dumps(fast_tree.to_dict()) == json.dumps(slow_tree.to_dict()), "backends disagree"

    timing = {}
    for backend in (True, False):
        _accel.USE_NUMBA = backend
        for name, fn in cases(X, y, args.trees).items():
            fn()
            timing[name, backend] = best_of(fn, args.repeat)

    print(f"{args.rows} rows x {args.features} features, best of {args.repeat}")
    print(f"{'case':<40} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name in dict.fromkeys(k for k, _ in timing):
        fast, slow = timing[name, True], timing[name, False]
        print(f"{name:<40} {fast:>10.4f} {slow:>10.4f} {slow / fast:>7.1f}x")

if __name__ == "__main__":
    main()
