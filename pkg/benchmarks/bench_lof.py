#!/usr/bin/env python3
"""Compare the compiled distance kernel against the NumPy fallback.

Times the novelty-detector fit and batch scoring on synthetic feature
matrices. Run after building the extension:

    python benchmarks/bench_lof.py [--sizes 1000 3000] [--dim 64] [--k 20]
"""

import argparse
import time

import numpy as np

from smdn.kernels import available_backends
from smdn import lof as lof_mod


def time_backend(kernel_module, train, queries, k, repeats=3):
    original = lof_mod.pairwise_dists
    lof_mod.pairwise_dists = kernel_module.pairwise_dists
    try:
        best_fit, best_score = float("inf"), float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = lof_mod.fit_lof(train, k=k, alpha=2.0, calib_features=queries[:50])
            best_fit = min(best_fit, time.perf_counter() - t0)
            t0 = time.perf_counter()
            scores = lof_mod.lof_scores(queries, model)
            best_score = min(best_score, time.perf_counter() - t0)
        return best_fit, best_score, scores
    finally:
        lof_mod.pairwise_dists = original


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[1000, 3000])
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--queries", type=int, default=500)
    parser.add_argument("--k", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the numpy fallback is available")
    rng = np.random.default_rng(args.seed)

    print(f"{'M':>6} {'D':>4} {'backend':>8} {'fit (s)':>9} {'score (s)':>10} {'speedup':>8}")
    for m in args.sizes:
        train = rng.standard_normal((m, args.dim))
        queries = rng.standard_normal((args.queries, args.dim))
        rows = {}
        reference = None
        for name, module in sorted(backends.items()):
            fit_s, score_s, scores = time_backend(module, train, queries, args.k)
            rows[name] = (fit_s, score_s)
            if reference is None:
                reference = scores
            else:
                worst = float(np.abs(scores - reference).max())
                assert worst < 1e-9, f"backends disagree by {worst}"
        base = rows.get("numpy", next(iter(rows.values())))
        for name, (fit_s, score_s) in sorted(rows.items()):
            speed = base[0] / fit_s if fit_s > 0 else float("inf")
            print(f"{m:>6} {args.dim:>4} {name:>8} {fit_s:>9.3f} {score_s:>10.3f} {speed:>7.1f}x")


if __name__ == "__main__":
    main()
