"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from fairbbr import kernels


def filter_case(backend, n=20_000, window=10):
    rng = np.random.default_rng(0)
    keys = np.cumsum(rng.integers(0, 2, n)).tolist()
    vals = rng.normal(size=n).tolist()

    def run():
        f = backend.WindowedFilter(True)
        for k, v in zip(keys, vals):
            f.update(k, v)
            f.expire(k - window)
            f.best(k - window)
    return run


def gini_case(backend, n=5_000):
    rng = np.random.default_rng(1)
    xs = np.sort(rng.normal(size=n))
    ys = rng.integers(0, 2, n).astype(np.int64)
    return lambda: backend.gini_best_split(xs, ys)


def pegasos_case(backend, n=5_000, d=2):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    order = rng.permutation(n).astype(np.int64)

    def run():
        w = np.zeros(d)
        backend.pegasos_epoch(X, y, w, 0.0, 0.01, order, 0, True)
    return run


CASES = {"windowed_filter (20k updates)": filter_case,
         "gini_best_split (5k rows)": gini_case,
         "pegasos_epoch (5k rows)": pegasos_case}


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled backend unavailable; timing the Python fallback only")
    print(f"{'kernel':32s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}")
    for name, case in CASES.items():
        py = best_of(case(kernels.python_backend), args.repeat) * 1e3
        if compiled is None:
            print(f"{name:32s} {py:12.2f} {'-':>12s} {'-':>8s}")
            continue
        cy = best_of(case(compiled), args.repeat) * 1e3
        print(f"{name:32s} {py:12.2f} {cy:12.2f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
