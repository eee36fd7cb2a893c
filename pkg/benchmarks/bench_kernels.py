"""Time the compiled and pure-Python kernels on the same workloads.

    python benchmarks/bench_kernels.py [--rows 3333] [--repeat 3] [--shap-rows 20]

Each workload also checks that both backends return identical results.
"""

import argparse
import time

import numpy as np

from churnkit import _kernels
from churnkit.data import SplitSpec, convert_types, make_synthetic_telco, select_features, train_test_split
from churnkit.explain import TreeExplainer, make_background
from churnkit.gbt import GbtParams, fit_gbt, predict_margin
from churnkit.tree import ForestConfig, fit_forest


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads(split, shap_rows):
    X, y = split.X_train, split.y_train
    model = fit_gbt(X, y, GbtParams())
    B = make_background(X, 256, seed=0)
    rows = split.X_test.values[:shap_rows]
    return {
        "gbt fit (50 rounds)": lambda: fit_gbt(X, y, GbtParams()).dumps(),
        "forest fit (20 trees)": lambda: fit_forest(X, y, ForestConfig(n_trees=20)).dumps(),
        "gbt predict": lambda: predict_margin(model, split.X_test).tobytes(),
        f"tree shap ({shap_rows} rows)": lambda: TreeExplainer(model, B).explain(rows).values.tobytes(),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=3333)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--shap-rows", type=int, default=20)
    args = ap.parse_args()

    X, y = select_features(convert_types(make_synthetic_telco(args.rows, seed=0)))
    split = train_test_split(X, y, SplitSpec(0.7, 0))
    backends = sorted(_kernels.BACKENDS)
    if len(backends) < 2:
        print("compiled core not built; only the python backend is available")

    results, labels = {}, []
    for name in backends:
        with _kernels.use_backend(name):
            jobs = workloads(split, args.shap_rows)
            labels = list(jobs)
            for label, fn in jobs.items():
                results[label, name] = best_of(fn, args.repeat)

    print(f"{'workload':<24}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'equal':>7}")
    for label in labels:
        cells = [results[label, b] for b in backends]
        line = f"{label:<24}" + "".join(f"{t:>11.3f}s" for t, _ in cells)
        if len(cells) == 2:
            (t_c, out_c), (t_p, out_p) = cells  # sorted: cython, python
            line += f"{t_p / t_c:>9.1f}x{str(out_c == out_p):>7}"
        print(line)


if __name__ == "__main__":
    main()
