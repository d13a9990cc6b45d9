"""Weighted-l1 (adaptive lasso) least squares by cyclic coordinate descent.

The objective is ``(1/n)||y - Z b||^2 + lam * sum_j w_j |b_j|``. Fits work on
the Gram matrix ``Z'Z`` and ``Z'y`` so that cross-validation folds and the
two network blocks can be accumulated independently.

Rows may be split into groups (one per network). Every reduction over rows
is done per group and the group totals are added, which makes results
invariant, bit for bit, to the order in which the groups are supplied.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .kernels import gcv_select, ridge_from_gram

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000
DEFAULT_STOP_RISE = 0.1
DEBUG = os.environ.get("REDNET_DEBUG", "").strip() not in ("", "0")

CONVERGED, NOT_CONVERGED, OBJECTIVE_INCREASED = 1, 0, -1


@dataclass
class AdaLassoProblem:
    design: np.ndarray
    response: np.ndarray
    weights: np.ndarray
    lam: float

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.response = np.asarray(self.response, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.design.shape[1],):
            raise ValueError("one weight per design column required")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("weights must be finite and positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    def objective(self, beta) -> float:
        r = self.response - self.design @ beta
        return float(r @ r) / self.n + self.lam * float(self.weights @ np.abs(beta))


@dataclass
class FitResult:
    beta: np.ndarray
    iterations: int
    converged: bool


def _cd_python(gram, xty, yty, n, weights, lam, beta, tol, kkt_tol, max_iter, debug):
    m = gram.shape[0]
    # zero solves the problem once lam reaches the null threshold; checking it
    # up front keeps a coordinate sitting exactly on the threshold from
    # surviving as a rounding-level nonzero
    if np.all(2.0 * np.abs(xty) <= n * lam * weights * (1.0 + 1e-12)):
        beta[:] = 0.0
        return 0, CONVERGED
    thresh = 0.5 * n * lam * weights
    diag = np.diag(gram).copy()
    grad = xty - gram @ beta
    full = True
    active = np.arange(m)
    prev = np.inf
    if debug:
        prev = (yty - xty @ beta - beta @ grad) / n + lam * (weights @ np.abs(beta))
    it = 0
    while it < max_iter:
        it += 1
        idx = np.arange(m) if full else active
        max_delta = 0.0
        for j in idx:
            d = diag[j]
            if d <= 0.0:
                continue
            old = beta[j]
            rho = grad[j] + d * old
            if rho > thresh[j]:
                new = (rho - thresh[j]) / d
            elif rho < -thresh[j]:
                new = (rho + thresh[j]) / d
            else:
                new = 0.0
            if new != old:
                delta = new - old
                beta[j] = new
                grad -= gram[:, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if debug:
            obj = (yty - xty @ beta - beta @ grad) / n + lam * (weights @ np.abs(beta))
            if obj > prev + 1e-10 * (abs(prev) + 1.0):
                return it, OBJECTIVE_INCREASED
            prev = obj
        if full:
            if max_delta < tol:
                grad = xty - gram @ beta
                scaled = 2.0 * grad / n
                nz = beta != 0
                res = np.where(
                    nz,
                    np.abs(scaled - lam * weights * np.sign(beta)),
                    np.maximum(0.0, np.abs(scaled) - lam * weights),
                )
                res[diag <= 0] = 0.0
                if res.max(initial=0.0) <= kkt_tol:
                    return it, CONVERGED
            else:
                full = False
                active = np.flatnonzero(beta)
        elif max_delta < tol:
            full = True
    return it, NOT_CONVERGED


def _cd_loops(gram, xty, yty, n, weights, lam, beta, tol, kkt_tol, max_iter, debug):
    m = gram.shape[0]
    null = True
    for j in range(m):
        if 2.0 * abs(xty[j]) > n * lam * weights[j] * (1.0 + 1e-12):
            null = False
            break
    if null:
        for j in range(m):
            beta[j] = 0.0
        return 0, 1
    grad = np.empty(m)
    for k in range(m):
        s = xty[k]
        for j in range(m):
            s -= gram[k, j] * beta[j]
        grad[k] = s
    thresh = np.empty(m)
    for j in range(m):
        thresh[j] = 0.5 * n * lam * weights[j]
    active = np.empty(m, dtype=np.int64)
    n_active = 0
    full = True
    prev = np.inf
    if debug:
        prev = yty
        pen = 0.0
        for j in range(m):
            prev -= xty[j] * beta[j] + beta[j] * grad[j]
            pen += weights[j] * abs(beta[j])
        prev = prev / n + lam * pen
    it = 0
    while it < max_iter:
        it += 1
        max_delta = 0.0
        count = m if full else n_active
        for t in range(count):
            j = t if full else active[t]
            d = gram[j, j]
            if d <= 0.0:
                continue
            old = beta[j]
            rho = grad[j] + d * old
            if rho > thresh[j]:
                new = (rho - thresh[j]) / d
            elif rho < -thresh[j]:
                new = (rho + thresh[j]) / d
            else:
                new = 0.0
            if new != old:
                delta = new - old
                beta[j] = new
                for k in range(m):
                    grad[k] -= gram[k, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if debug:
            obj = yty
            pen = 0.0
            for j in range(m):
                obj -= xty[j] * beta[j] + beta[j] * grad[j]
                pen += weights[j] * abs(beta[j])
            obj = obj / n + lam * pen
            if obj > prev + 1e-10 * (abs(prev) + 1.0):
                return it, -1
            prev = obj
        if full:
            if max_delta < tol:
                worst = 0.0
                for k in range(m):
                    s = xty[k]
                    for j in range(m):
                        s -= gram[k, j] * beta[j]
                    grad[k] = s
                    if gram[k, k] <= 0.0:
                        continue
                    scaled = 2.0 * s / n
                    if beta[k] > 0.0:
                        r = abs(scaled - lam * weights[k])
                    elif beta[k] < 0.0:
                        r = abs(scaled + lam * weights[k])
                    else:
                        r = abs(scaled) - lam * weights[k]
                    if r > worst:
                        worst = r
                if worst <= kkt_tol:
                    return it, 1
            else:
                full = False
                n_active = 0
                for j in range(m):
                    if beta[j] != 0.0:
                        active[n_active] = j
                        n_active += 1
        elif max_delta < tol:
            full = True
    return it, 0


_cd_jit = _accel.njit(_cd_loops)


def _kernel(backend=None):
    if backend is None:
        backend = _accel.backend_name()
    return _cd_jit if backend == "numba" else _cd_python


def cd_gram(gram, xty, yty, n, weights, lam, beta0=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
            kkt_tol=None, debug=None, backend=None) -> FitResult:
    """Coordinate descent on precomputed sufficient statistics.

    Converges when a full sweep moves no coefficient by ``tol`` or more and
    the KKT residual is at most ``kkt_tol`` (default ``10 * tol``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gram = np.ascontiguousarray(gram, dtype=float)
    xty = np.ascontiguousarray(xty, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    m = gram.shape[0]
    beta = np.zeros(m) if beta0 is None else np.array(beta0, dtype=float)
    if kkt_tol is None:
        kkt_tol = 10.0 * tol
    if debug is None:
        debug = DEBUG
    if m == 0:
        return FitResult(beta, 0, True)
    it, status = _kernel(backend)(gram, xty, float(yty), float(n), weights, float(lam), beta, float(tol),
                                  float(kkt_tol), int(max_iter), bool(debug))
    _check_status(it, status)
    return FitResult(beta, int(it), status == CONVERGED)


def _check_status(it, status):
    if status == OBJECTIVE_INCREASED:
        raise AssertionError(f"objective increased during coordinate descent at sweep {it}")


def adaptive_weights(beta_init, epsilon: float | None = None):
    """``1 / (|beta_init| + epsilon)``.

    The default ``epsilon`` is ``1e-4 * (max|beta_init| + 1e-12)``.
    """
    b = np.abs(np.asarray(beta_init, dtype=float))
    if epsilon is None:
        epsilon = 1e-4 * ((b.max() if b.size else 0.0) + 1e-12)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 1.0 / (b + epsilon)


def lambda_max(design, response, weights) -> float:
    """Smallest penalty at which the all-zero vector solves the problem."""
    z = np.atleast_2d(design)
    n = z.shape[0]
    return float(np.max(2.0 * np.abs(z.T @ response) / (n * np.asarray(weights)), initial=0.0))


def kkt_residual(prob: AdaLassoProblem, beta_hat) -> float:
    """Largest violation of the stationarity conditions at ``beta_hat``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    r = prob.response - prob.design @ beta_hat
    scaled = 2.0 * (prob.design.T @ r) / prob.n
    lw = prob.lam * prob.weights
    res = np.where(
        beta_hat != 0,
        np.abs(scaled - lw * np.sign(beta_hat)),
        np.maximum(0.0, np.abs(scaled) - lw),
    )
    return float(res.max(initial=0.0))


def adalasso_fit(prob: AdaLassoProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 beta0=None) -> FitResult:
    z, y = prob.design, prob.response
    return cd_gram(z.T @ z, z.T @ y, float(y @ y), prob.n, prob.weights, prob.lam,
                   beta0=beta0, tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# grouped sufficient statistics and cross-validation


def _as_groups(design, response, groups):
    design = np.atleast_2d(np.asarray(design, dtype=float))
    response = np.asarray(response, dtype=float)
    if groups is None:
        return [(design, response)]
    groups = np.asarray(groups)
    out = []
    start = 0
    # groups are contiguous row blocks
    bounds = np.flatnonzero(np.diff(groups)) + 1
    for stop in list(bounds) + [groups.size]:
        out.append((design[start:stop], response[start:stop]))
        start = stop
    return out


def _stats(blocks):
    gram = None
    xty = None
    yty = 0.0
    for z, y in blocks:
        g = z.T @ z
        c = z.T @ y
        s = float(y @ y)
        if gram is None:
            gram, xty, yty = g, c, s
        else:
            gram = gram + g
            xty = xty + c
            yty = yty + s
    return gram, xty, yty


def fold_assignment(n_rows: int, folds: int, seed) -> np.ndarray:
    """Contiguous fold blocks over a seeded shuffle of ``range(n_rows)``."""
    perm = np.random.default_rng(seed).permutation(n_rows)
    fold = np.empty(n_rows, dtype=np.intp)
    fold[perm] = (np.arange(n_rows) * folds) // n_rows
    return fold


def default_cv_grid(lam_max: float, num: int = 100, ratio: float = 1e-4) -> np.ndarray:
    if lam_max <= 0:
        return np.array([0.0])
    return np.geomspace(lam_max, lam_max * ratio, num)


def _path(gram, xty, yty, n, weights, grid, tol, max_iter, beta0=None):
    m = gram.shape[0]
    beta = np.zeros(m) if beta0 is None else beta0.copy()
    coefs = np.empty((len(grid), m))
    iters = 0
    ok = True
    for k, lam in enumerate(grid):
        res = cd_gram(gram, xty, yty, n, weights, lam, beta0=beta, tol=tol, max_iter=max_iter)
        beta = res.beta
        coefs[k] = beta
        iters += res.iterations
        ok &= res.converged
    return coefs, iters, ok


def cv_select_lambda(design, response, weights, folds: int = 10, grid=None, seed=0, groups=None,
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     stop_rise: float | None = DEFAULT_STOP_RISE, rule: str = "min"):
    """K-fold cross-validation over a descending penalty grid.

    Folds are assigned separately inside each row group (from the same seed)
    so every fold holds a share of each group. All folds walk the grid
    together with warm starts; when ``stop_rise`` is set the walk ends once the
    pooled held-out error exceeds ``(1 + stop_rise)`` times its running
    minimum, and the remaining curve entries are ``inf``.

    Returns ``(lam_star, cv_curve)`` where ``cv_curve`` is the pooled held-out
    mean squared error. ``rule="min"`` takes the minimizer (ties go to the
    larger penalty); ``rule="1se"`` takes the largest penalty whose error is
    within one standard error of the minimum, the standard error being the
    spread of the per-fold mean squared errors divided by ``sqrt(folds)``.
    """
    if rule not in ("min", "1se"):
        raise ValueError(f"unknown cross-validation rule {rule!r}")
    blocks = _as_groups(design, response, groups)
    n = sum(z.shape[0] for z, _ in blocks)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"{n} rows cannot be split into {folds} folds")
    weights = np.asarray(weights, dtype=float)
    if grid is None:
        _, xty, _ = _stats(blocks)
        grid = default_cv_grid(float(np.max(2.0 * np.abs(xty) / (n * weights), initial=0.0)))
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("penalty grid is empty")
    if np.any(np.diff(grid) > 0):
        raise ValueError("penalty grid must be sorted in descending order")
    assign = [fold_assignment(z.shape[0], folds, seed) for z, _ in blocks]
    states = []
    for f in range(folds):
        gram, xty, yty = _stats([(z[a != f], y[a != f]) for (z, y), a in zip(blocks, assign)])
        n_train = sum(int(np.sum(a != f)) for a in assign)
        states.append((np.ascontiguousarray(gram), np.ascontiguousarray(xty), float(yty), float(n_train)))
    n_test = sum(np.bincount(a, minlength=folds) for a in assign)
    # the kernel is called directly: the arrays are prepared once and each
    # fold's coefficients are warm-started in place along the grid
    weights = np.ascontiguousarray(weights)
    kernel = _kernel()
    kkt_tol = 10.0 * tol
    betas = np.zeros((folds, weights.size))
    curve = np.full(grid.size, np.inf)
    fold_mse = np.full((grid.size, folds), np.nan)
    best = np.inf
    for k, lam in enumerate(grid):
        if weights.size:
            for f, (gram, xty, yty, n_train) in enumerate(states):
                it, status = kernel(gram, xty, yty, n_train, weights, float(lam), betas[f], float(tol), kkt_tol,
                                    int(max_iter), DEBUG)
                _check_status(it, status)
        # held-out error of every fold at once, group by group
        fold_sse = np.zeros(folds)
        for (z, y), a in zip(blocks, assign):
            r = y - np.take_along_axis(z @ betas.T, a[:, None], axis=1)[:, 0]
            fold_sse = fold_sse + np.bincount(a, weights=r * r, minlength=folds)
        fold_mse[k] = fold_sse / n_test
        curve[k] = fold_sse.sum() / n
        best = min(best, curve[k])
        if stop_rise is not None and curve[k] > (1.0 + stop_rise) * best:
            break
    k_min = int(np.argmin(curve))
    if rule == "1se":
        row = fold_mse[k_min][np.isfinite(fold_mse[k_min])]
        se = float(np.std(row, ddof=1) / np.sqrt(row.size)) if row.size > 1 else 0.0
        k_min = int(np.flatnonzero(curve <= curve[k_min] + se)[0])
    return float(grid[k_min]), curve


@dataclass
class StageTwoFit:
    """Outcome of the tuned adaptive-lasso fit for one node."""

    beta: np.ndarray
    lam: float
    lam_max: float
    weights: np.ndarray
    init_ridge_lambda: float
    iterations: int
    converged: bool
    cv_curve: np.ndarray = field(repr=False, default=None)


def tuned_adalasso(design, response, groups=None, folds: int = 10, seed=0, n_lambda: int = 100,
                   lambda_min_ratio: float = 1e-4, ridge_grid=None, epsilon=None,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   stop_rise: float | None = DEFAULT_STOP_RISE, cv_rule: str = "min") -> StageTwoFit:
    """Ridge-initialized adaptive lasso with a cross-validated penalty."""
    blocks = _as_groups(design, response, groups)
    design = np.vstack([z for z, _ in blocks])
    response = np.concatenate([y for _, y in blocks])
    n = design.shape[0]
    gram, xty, yty = _stats(blocks)
    ridge_lam, _ = gcv_select(design, response, ridge_grid)
    init = ridge_from_gram(gram, xty, ridge_lam)
    weights = adaptive_weights(init, epsilon)
    lmax = float(np.max(2.0 * np.abs(xty) / (n * weights), initial=0.0))
    grid = default_cv_grid(lmax, n_lambda, lambda_min_ratio)
    lam, curve = cv_select_lambda(design, response, weights, folds, grid, seed, groups, tol, max_iter, stop_rise,
                                  cv_rule)
    stop = int(np.flatnonzero(grid == lam)[0])
    coefs, iters, ok = _path(gram, xty, yty, n, weights, grid[: stop + 1], tol, max_iter)
    return StageTwoFit(coefs[-1].copy(), lam, lmax, weights, ridge_lam, iters, ok, curve)
