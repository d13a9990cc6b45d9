"""Dense linear-algebra primitives used by both stages."""
from __future__ import annotations

import numpy as np
from scipy import linalg


class SingularSystemError(np.linalg.LinAlgError):
    pass


def standardize_columns(x):
    """Scale every column of ``x`` to Euclidean norm ``sqrt(n)``.

    Returns ``(x_std, scales)`` with ``x == x_std * scales``. No centering is
    done. Raises ``ValueError`` naming the first all-zero column.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ValueError(f"column {bad[0]} has zero norm and cannot be standardized")
    scales = norms / np.sqrt(n)
    return x / scales, scales


def ridge_fit(x, y, lam: float):
    """Closed-form ridge coefficients ``(X'X + lam I)^{-1} X'y``.

    Solved by Cholesky; when the factorization fails and ``lam > 0`` the
    system is handed to an SVD-based least-squares solver instead.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("ridge penalty must be nonnegative")
    gram = x.T @ x
    return ridge_from_gram(gram, x.T @ y, lam)


def ridge_from_gram(gram, xty, lam: float):
    """Ridge solve given the Gram matrix and ``X'y``."""
    d = gram.shape[0]
    a = gram + lam * np.eye(d)
    try:
        c, low = linalg.cho_factor(a, lower=False, check_finite=False)
        beta = linalg.cho_solve((c, low), xty, check_finite=False)
        if np.all(np.isfinite(beta)):
            return beta
    except linalg.LinAlgError:
        pass
    if lam == 0:
        raise SingularSystemError("X'X is singular; use a positive ridge penalty (lambda > 0)")
    beta, *_ = linalg.lstsq(a, xty, lapack_driver="gelsd", check_finite=False)
    return beta


def default_ridge_grid(n: int, num: int = 50) -> np.ndarray:
    """Log-spaced penalties from ``1e-4 n`` to ``1e2 n``."""
    return np.geomspace(1e-4 * n, 1e2 * n, num)


def thin_svd(x):
    """``(u, s)`` of the economy SVD; the right singular vectors are not needed."""
    u, s, _ = linalg.svd(np.asarray(x, dtype=float), full_matrices=False, check_finite=False)
    return u, s


def gcv_scores(x, y, grid, svd=None):
    """Generalized cross-validation score for each penalty in ``grid``.

    ``GCV(lam) = (1/n)||(I - A)y||^2 / ((1/n) tr(I - A))^2`` with
    ``A = X (X'X + lam I)^{-1} X'``, evaluated from one thin SVD of ``x``
    (pass ``svd=thin_svd(x)`` to reuse it across responses).
    """
    y = np.asarray(y, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = y.shape[0]
    u, s = thin_svd(x) if svd is None else svd
    uty = u.T @ y
    outside = y - u @ uty
    rss_outside = float(outside @ outside)
    s2 = s * s
    scores = np.empty(grid.size)
    for k, lam in enumerate(grid):
        shrink = lam / (s2 + lam)
        rss = rss_outside + float(np.sum((shrink * uty) ** 2))
        trace = n - float(np.sum(s2 / (s2 + lam)))
        scores[k] = (rss / n) / (trace / n) ** 2
    return scores


def gcv_select(x, y, grid=None, svd=None):
    """Pick the grid penalty minimizing GCV; returns ``(lam_star, scores)``.

    Ties go to the smallest penalty so the choice does not depend on grid
    order.
    """
    if grid is None:
        grid = default_ridge_grid(np.shape(x)[0])
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("ridge grid is empty")
    if np.any(grid <= 0):
        raise ValueError("ridge grid entries must be positive")
    scores = gcv_scores(x, y, grid, svd)
    best = np.flatnonzero(scores == scores.min())
    return float(grid[best[np.argmin(grid[best])]]), scores


def ols_fit(x, y):
    """Least squares through a QR factorization; rank deficiency raises."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    if d > n:
        raise SingularSystemError(f"{d} columns but only {n} rows")
    q, r = linalg.qr(x, mode="economic", check_finite=False)
    diag = np.abs(np.diag(r))
    if diag.size and diag.min() <= 1e-12 * max(diag.max(), 1.0) * max(n, d):
        raise SingularSystemError("design is rank deficient")
    return linalg.solve_triangular(r, q.T @ y, check_finite=False)


class AnchorProjector:
    """Residual maker ``H = I - X_A (X_A'X_A)^{-1} X_A'`` kept in factored form."""

    def __init__(self, x_a):
        x_a = np.asarray(x_a, dtype=float)
        if x_a.ndim == 1:
            x_a = x_a[:, None]
        n, a = x_a.shape
        if a >= n:
            raise SingularSystemError(f"{a} anchor columns but only {n} rows")
        gram = x_a.T @ x_a
        eig = np.linalg.eigvalsh(gram) if a else np.zeros(0)
        if a and eig[0] <= 1e-10 * max(eig[-1], 1e-300):
            raise SingularSystemError("anchor columns are collinear")
        self.x_a = x_a
        self.n = n
        self._chol = linalg.cho_factor(gram, check_finite=False) if a else None

    def apply(self, m):
        m = np.asarray(m, dtype=float)
        if self._chol is None:
            return m.copy()
        coef = linalg.cho_solve(self._chol, self.x_a.T @ m, check_finite=False)
        return m - self.x_a @ coef

    def matrix(self):
        return self.apply(np.eye(self.n))


def annihilator(x_a):
    """Dense ``n x n`` residual-maker matrix for the columns of ``x_a``."""
    return AnchorProjector(x_a).matrix()


def apply_annihilator(x_a, m):
    """``annihilator(x_a) @ m`` without building the ``n x n`` matrix."""
    return AnchorProjector(x_a).apply(m)
