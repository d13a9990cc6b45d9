"""Coordinate descent: jitted kernel vs the pure-numpy fallback.

Fits a warm-started adaptive lasso path on a stacked design shaped like one
stage-2 node problem and reports wall time per backend plus the largest
coefficient difference between them.

    python benchmarks/bench_cd.py [--p 60] [--n 250] [--repeat 3]
"""
import argparse
import time

import numpy as np

from rednet.solver import adaptive_weights, cd_gram, default_cv_grid
from rednet.kernels import ridge_fit


def make_problem(p, n, seed):
    rng = np.random.default_rng(seed)
    m = p - 1
    base = rng.standard_normal((n, m))
    z1 = base + 0.5 * rng.standard_normal((n, m))
    z2 = base + 0.5 * rng.standard_normal((n, m))
    z = np.block([[z1, z1], [z2, -z2]])
    beta = np.zeros(2 * m)
    beta[rng.choice(2 * m, 6, replace=False)] = rng.uniform(0.3, 0.8, 6) * rng.choice([-1, 1], 6)
    y = z @ beta + 0.3 * rng.standard_normal(2 * n)
    return z, y


def run_path(backend, gram, xty, yty, n, w, grid):
    beta = np.zeros(gram.shape[0])
    sweeps = 0
    for lam in grid:
        fit = cd_gram(gram, xty, yty, n, w, lam, beta0=beta, backend=backend)
        beta, sweeps = fit.beta, sweeps + fit.iterations
    return beta, sweeps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=60)
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--n-lambda", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    z, y = make_problem(args.p, args.n, args.seed)
    n = z.shape[0]
    gram, xty, yty = z.T @ z, z.T @ y, float(y @ y)
    w = adaptive_weights(ridge_fit(z, y, 1.0))
    lam_max = float(np.max(2 * np.abs(xty) / (n * w)))
    grid = default_cv_grid(lam_max, args.n_lambda, 1e-3)

    # compile outside the timed region
    cd_gram(gram, xty, yty, n, w, grid[0], backend="numba")

    results = {}
    for backend in ("numba", "numpy"):
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            beta, sweeps = run_path(backend, gram, xty, yty, n, w, grid)
            times.append(time.perf_counter() - t0)
        results[backend] = beta
        print(f"{backend:6s} width={gram.shape[0]:4d} path={grid.size} sweeps={sweeps:6d} "
              f"best={min(times):.4f}s median={np.median(times):.4f}s")
    diff = np.max(np.abs(results["numba"] - results["numpy"]))
    print(f"max |beta_numba - beta_numpy| = {diff:.3g}")


if __name__ == "__main__":
    main()
