"""Compiled vs numpy tree kernels: split search, batch prediction and full training.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--features 15] [--repeat 5]
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np

from reshi import _kernels_py, kernels, tree


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


@contextmanager
def backend(module):
    saved = kernels.best_split, kernels.predict_batch
    kernels.best_split, kernels.predict_batch = module.best_split, module.predict_batch
    try:
        yield
    finally:
        kernels.best_split, kernels.predict_batch = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--features", type=int, default=15)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.integers(1, 28, (args.rows, args.features)).astype(np.float64)
    y = X[:, 0] * 0.3 + np.sin(X[:, 1]) + rng.normal(0, 0.1, args.rows)
    yc = y - y.mean()
    fitted = tree.train(X, y, tree.TreeParams(max_depth=12))
    arrays = (fitted.feature, fitted.threshold, fitted.left, fitted.right, fitted.value)

    backends = {"numpy": _kernels_py}
    try:
        from reshi import _kernels
        backends["cython"] = _kernels
    except ImportError:
        print("compiled extension not built; numpy only")

    print(f"rows={args.rows} features={args.features} default backend={kernels.BACKEND}")
    results = {}
    for name, mod in backends.items():
        with backend(mod):
            results[name] = {
                "best_split": best_of(lambda: mod.best_split(X, yc, 3), args.repeat),
                "predict_batch": best_of(lambda: mod.predict_batch(*arrays, X), args.repeat),
                "train(depth 12)": best_of(lambda: tree.train(X, y, tree.TreeParams(max_depth=12)), args.repeat),
            }
    print(f"{'kernel':18s}" + "".join(f"{n:>12s}" for n in results) + ("     speedup" if len(results) > 1 else ""))
    for k in results["numpy"]:
        row = f"{k:18s}" + "".join(f"{results[n][k] * 1e3:10.2f}ms" for n in results)
        if "cython" in results:
            row += f"{results['numpy'][k] / results['cython'][k]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
