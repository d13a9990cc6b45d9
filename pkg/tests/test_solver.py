import numpy as np
import pytest

from oracles import fixture_instances, grid_minimize, soft
from rednet.kernels import ols_fit
from rednet.solver import (
    AdaLassoProblem,
    adalasso_fit,
    adaptive_weights,
    cd_gram,
    cv_select_lambda,
    default_cv_grid,
    fold_assignment,
    kkt_residual,
    lambda_max,
    tuned_adalasso,
)


def test_adaptive_weights_examples():
    np.testing.assert_allclose(adaptive_weights([1.0, 0.0], 0.01), [1 / 1.01, 100.0], rtol=1e-12)
    assert adaptive_weights([1.0, 0.0], 0.01)[0] == pytest.approx(0.9901, abs=5e-5)
    np.testing.assert_array_equal(adaptive_weights(np.zeros(3), 0.5), [2.0, 2.0, 2.0])
    w = adaptive_weights([0.1, 0.5, 2.0, 3.0])
    assert np.all(np.diff(w) < 0) and np.all(np.isfinite(w))
    w0 = adaptive_weights([2.0, 0.0])
    assert w0[1] == pytest.approx(1 / (1e-4 * (2 + 1e-12)))
    with pytest.raises(ValueError):
        adaptive_weights([1.0], 0.0)


def test_problem_validation():
    z = np.ones((3, 2))
    with pytest.raises(ValueError):
        AdaLassoProblem(z, np.ones(3), np.array([1.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        AdaLassoProblem(z, np.ones(3), np.ones(3), 1.0)
    with pytest.raises(ValueError):
        AdaLassoProblem(z, np.ones(3), np.ones(2), -1.0)


def test_orthonormal_closed_form_and_grid():
    rng = np.random.default_rng(21)
    n = 12
    q, _ = np.linalg.qr(rng.standard_normal((n, 3)))
    z = np.sqrt(n) * q
    y = z @ np.array([1.2, -0.4, 0.05]) + 0.2 * rng.standard_normal(n)
    w = np.array([1.0, 2.0, 3.0])
    prob = AdaLassoProblem(z, y, w, 0.3)
    fit = adalasso_fit(prob)
    closed = soft(z.T @ y / n, prob.lam * w / 2)
    np.testing.assert_allclose(fit.beta, closed, atol=1e-7)
    assert np.abs(fit.beta - grid_minimize(prob)).max() <= 2e-3
    assert np.count_nonzero(closed) < 3  # the instance exercises an exact zero
    assert np.array_equal(fit.beta == 0, closed == 0)


@pytest.mark.parametrize("k", range(12))
def test_brute_force_grid(k):
    prob = fixture_instances()[k]
    fit = adalasso_fit(prob)
    assert fit.converged
    ref = grid_minimize(prob)
    assert np.all(np.abs(ref) < 2.0)
    assert np.abs(fit.beta - ref).max() <= 2e-3
    assert kkt_residual(prob, fit.beta) <= 1e-6


def test_lambda_zero_is_ols():
    rng = np.random.default_rng(22)
    z = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    fit = adalasso_fit(AdaLassoProblem(z, y, np.ones(5), 0.0), tol=1e-10)
    np.testing.assert_allclose(fit.beta, ols_fit(z, y), atol=1e-6)


def test_null_threshold():
    rng = np.random.default_rng(23)
    z = rng.standard_normal((30, 6))
    y = z[:, 0] + rng.standard_normal(30)
    w = rng.uniform(0.5, 3, 6)
    lmax = lambda_max(z, y, w)
    for lam in (lmax, 1.5 * lmax):
        prob = AdaLassoProblem(z, y, w, lam)
        fit = adalasso_fit(prob)
        assert np.all(fit.beta == 0)
        assert kkt_residual(prob, fit.beta) == 0
    fit = adalasso_fit(AdaLassoProblem(z, y, w, 0.99 * lmax))
    assert np.count_nonzero(fit.beta) >= 1


def test_kkt_perturbation():
    rng = np.random.default_rng(24)
    n = 50
    q, _ = np.linalg.qr(rng.standard_normal((n, 3)))
    z = np.sqrt(n) * q
    y = z @ np.array([1.0, -0.8, 0.0]) + 0.1 * rng.standard_normal(n)
    w = np.ones(3)
    prob = AdaLassoProblem(z, y, w, 0.2)
    fit = adalasso_fit(prob)
    assert kkt_residual(prob, fit.beta) <= 1e-6
    j = int(np.flatnonzero(fit.beta)[0])
    bad = fit.beta.copy()
    bad[j] += 0.1
    # with z'z = n I the stationarity gap on coordinate j is exactly 0.2
    assert kkt_residual(prob, bad) == pytest.approx(0.2, abs=1e-6)
    assert kkt_residual(prob, bad) >= prob.lam * w[j] * 0.05


def test_backends_agree_and_debug_monotone():
    rng = np.random.default_rng(25)
    z = rng.standard_normal((60, 30))
    y = z[:, :4] @ np.array([1.0, -1, 0.5, 0.3]) + rng.standard_normal(60)
    w = adaptive_weights(np.linalg.lstsq(z, y, rcond=None)[0])
    g, c, yy = z.T @ z, z.T @ y, float(y @ y)
    lam = 0.05 * lambda_max(z, y, w)
    a = cd_gram(g, c, yy, 60, w, lam, backend="numba", debug=True)
    b = cd_gram(g, c, yy, 60, w, lam, backend="numpy", debug=True)
    assert a.converged and b.converged
    assert np.abs(a.beta - b.beta).max() <= 1e-12
    prob = AdaLassoProblem(z, y, w, lam)
    assert kkt_residual(prob, a.beta) <= 1e-6


def test_nonconvergence_flag():
    rng = np.random.default_rng(26)
    z = rng.standard_normal((20, 10))
    z[:, 1] = z[:, 0] + 1e-3 * rng.standard_normal(20)
    y = rng.standard_normal(20)
    fit = cd_gram(z.T @ z, z.T @ y, float(y @ y), 20, np.ones(10), 1e-4, max_iter=2)
    assert not fit.converged and fit.iterations == 2
    assert np.all(np.isfinite(fit.beta))
    with pytest.raises(ValueError):
        cd_gram(z.T @ z, z.T @ y, float(y @ y), 20, np.ones(10), 1e-4, tol=0)


def test_fold_assignment():
    f = fold_assignment(23, 5, 3)
    assert np.array_equal(np.bincount(f), [5, 5, 4, 5, 4]) or sorted(np.bincount(f)) == [4, 4, 5, 5, 5]
    assert np.array_equal(f, fold_assignment(23, 5, 3))
    assert not np.array_equal(f, fold_assignment(23, 5, 4))


def test_cv_examples_and_errors():
    rng = np.random.default_rng(27)
    z = rng.standard_normal((40, 5))
    y = z[:, 0] + rng.standard_normal(40)
    w = np.ones(5)
    lam, curve = cv_select_lambda(z, y, w, grid=[0.3])
    assert lam == 0.3 and curve.size == 1
    a = cv_select_lambda(z, y, w, seed=5)
    b = cv_select_lambda(z, y, w, seed=5)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    with pytest.raises(ValueError):
        cv_select_lambda(z, y, w, folds=1)
    with pytest.raises(ValueError):
        cv_select_lambda(z[:5], y[:5], w, folds=10)
    with pytest.raises(ValueError):
        cv_select_lambda(z, y, w, grid=[0.1, 0.2])
    with pytest.raises(ValueError):
        cv_select_lambda(z, y, w, grid=[])


def test_cv_full_curve_matches_early_stop_prefix():
    rng = np.random.default_rng(28)
    z = rng.standard_normal((60, 8))
    y = z[:, :2] @ [1.0, -0.5] + rng.standard_normal(60)
    w = np.ones(8)
    grid = default_cv_grid(lambda_max(z, y, w), 40)
    _, full = cv_select_lambda(z, y, w, grid=grid, stop_rise=None)
    _, early = cv_select_lambda(z, y, w, grid=grid)
    done = np.isfinite(early)
    assert np.all(np.isfinite(full))
    np.testing.assert_array_equal(early[done], full[done])


def test_cv_pure_noise_prefers_heavy_shrinkage():
    upper = 0
    for seed in range(100):
        rng = np.random.default_rng([29, seed])
        z = rng.standard_normal((60, 10))
        y = rng.standard_normal(60)
        w = np.ones(10)
        grid = default_cv_grid(lambda_max(z, y, w), 100)
        lam, _ = cv_select_lambda(z, y, w, grid=grid, seed=seed)
        upper += lam >= grid[49]
    assert upper >= 90


def test_tuned_adalasso_recovers_support():
    rng = np.random.default_rng(30)
    z = rng.standard_normal((200, 12))
    beta = np.zeros(12)
    beta[[1, 7]] = [0.8, -0.6]
    y = z @ beta + 0.1 * rng.standard_normal(200)
    fit = tuned_adalasso(z, y, seed=1, cv_rule="1se")
    assert np.array_equal(np.flatnonzero(fit.beta), [1, 7])
    assert fit.converged and 0 < fit.lam <= fit.lam_max
    assert kkt_residual(AdaLassoProblem(z, y, fit.weights, fit.lam), fit.beta) <= 1e-6
    # the prediction-optimal penalty keeps the signal but may add small extras
    fit_min = tuned_adalasso(z, y, seed=1, cv_rule="min")
    assert {1, 7} <= set(np.flatnonzero(fit_min.beta).tolist())
    assert fit_min.lam <= fit.lam


def test_one_se_rule():
    rng = np.random.default_rng(31)
    z = rng.standard_normal((80, 6))
    y = z[:, 0] + rng.standard_normal(80)
    w = np.ones(6)
    grid = default_cv_grid(lambda_max(z, y, w), 30)
    lam_min, curve = cv_select_lambda(z, y, w, grid=grid, stop_rise=None)
    lam_1se, curve2 = cv_select_lambda(z, y, w, grid=grid, stop_rise=None, rule="1se")
    assert np.array_equal(curve, curve2)
    assert lam_1se >= lam_min
    assert curve[np.flatnonzero(grid == lam_1se)[0]] >= curve.min()
    with pytest.raises(ValueError):
        cv_select_lambda(z, y, w, grid=grid, rule="median")


def test_exact_zero_at_threshold():
    # lambda equal to the null threshold must give exact zeros, not rounding residue
    rng = np.random.default_rng(32)
    for _ in range(200):
        z = rng.standard_normal((30, 5))
        y = rng.standard_normal(30)
        w = rng.uniform(0.1, 1e5, 5)
        fit = adalasso_fit(AdaLassoProblem(z, y, w, lambda_max(z, y, w)))
        assert np.all(fit.beta == 0)
