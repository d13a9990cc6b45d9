"""Two-stage differential network estimation and the per-network baseline.

Stage 1 predicts every endogenous column from screened exogenous columns
with GCV-tuned ridge regression. Stage 2 regresses each node on the
predictions of all other nodes from both networks at once, after the
reparameterization into average and differential effects and after
projecting out the node's anchor columns.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._parallel import pmap
from .config import RunConfig
from .kernels import AnchorProjector, default_ridge_grid, gcv_select, ols_fit, ridge_from_gram, thin_svd
from .model import (
    COMMON,
    DIFFERENTIAL,
    DifferentialEstimate,
    EdgeReport,
    NodeTuning,
    ObservationPair,
    classify_edges,
    reparameterize,
    require_valid_anchors,
)
from .screening import default_screen_size, sis_select
from .solver import tuned_adalasso

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """One or more node tasks failed in strict mode."""

    def __init__(self, failures):
        self.failures = list(failures)
        head = "; ".join(str(f) for f in self.failures[:5])
        super().__init__(f"{len(self.failures)} node task(s) failed: {head}")


@dataclass(frozen=True)
class NodeFailure:
    node: int
    network: int | None
    message: str

    def __str__(self):
        where = f"node {self.node}" + ("" if self.network is None else f" network {self.network}")
        return f"{where}: {self.message}"


# ---------------------------------------------------------------------------
# Stage 1


@dataclass
class CalibrationResult:
    """Reduced-form fits for both networks.

    ``pi_hat[k]`` is a sparse ``q x p`` matrix whose column ``i`` is supported
    on the screened set of node ``i``; ``y_hat[k] = X_k @ pi_hat[k]``.
    """

    pi_hat: dict
    y_hat: dict
    ridge_lambda: dict
    screens: dict
    failures: list = field(default_factory=list)


def calibrate_node(y_i, x, d=None, grid=None, rounds: int = 1, svd=None, gram=None, node=-1, network=0):
    """Screen, ridge-fit and predict one endogenous column.

    Returns ``(selected, coef, y_hat, ridge_lambda)`` with ``selected`` in
    ascending column order. ``svd`` and ``gram`` may carry precomputed
    factorizations of the full ``x`` for the unscreened case.
    """
    x = np.asarray(x, dtype=float)
    y_i = np.asarray(y_i, dtype=float)
    n, q = x.shape
    if grid is None:
        grid = default_ridge_grid(n)
    if q <= n:
        selected = np.arange(q)
        xm = x
    else:
        screen = sis_select(x, y_i, d, node=node, network=network, rounds=rounds)
        selected = np.sort(screen.selected)
        xm = x[:, selected]
        svd = gram = None
    lam, _ = gcv_select(xm, y_i, grid, svd=svd)
    if gram is None:
        gram = xm.T @ xm
    coef = ridge_from_gram(gram, xm.T @ y_i, lam)
    return selected, coef, xm @ coef, lam


def _stage1_task(shared, item):
    pair, cfg = shared
    k, nodes = item
    y, x, _ = pair.network(k)
    n, q = x.shape
    svd = thin_svd(x) if q <= n else None
    gram = x.T @ x if q <= n else None
    d = cfg.screen_d if cfg.screen_d is not None else default_screen_size(n)
    grid = default_ridge_grid(n, cfg.ridge_grid_size)
    out = []
    for i in nodes:
        try:
            sel, coef, yh, lam = calibrate_node(y[:, i], x, min(d, q), grid, cfg.screen_rounds, svd, gram, i, k)
            out.append((i, sel, coef, yh, lam, None))
        except Exception as exc:  # reported per node
            out.append((i, None, None, None, math.nan, f"{type(exc).__name__}: {exc}"))
    return out


def calibrate_all(pair: ObservationPair, config: RunConfig | None = None) -> CalibrationResult:
    """Stage 1 for all nodes of both networks."""
    cfg = config or RunConfig()
    p, q = pair.p, pair.q
    workers = max(1, cfg.threads)
    chunks = [np.arange(p)[w::workers] for w in range(workers)]
    items = [(k, c) for k in (1, 2) for c in chunks if c.size]
    parts = pmap(_stage1_task, items, (pair, cfg), workers)
    pi_hat, y_hat, lams, screens, failures = {}, {}, {}, {}, []
    for k in (1, 2):
        n = pair.network(k)[0].shape[0]
        y_hat[k] = np.zeros((n, p))
        lams[k] = np.full(p, math.nan)
        screens[k] = [None] * p
        rows, cols, vals = [], [], []
        for (kk, _), part in zip(items, parts):
            if kk != k:
                continue
            for i, sel, coef, yh, lam, err in part:
                if err is not None:
                    failures.append(NodeFailure(int(i), k, err))
                    continue
                y_hat[k][:, i] = yh
                lams[k][i] = lam
                screens[k][i] = sel
                rows.append(sel)
                cols.append(np.full(sel.size, i))
                vals.append(coef)
        if rows:
            pi_hat[k] = sparse.csc_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(q, p)
            )
        else:
            pi_hat[k] = sparse.csc_matrix((q, p))
    if failures and cfg.strict:
        raise PipelineError(failures)
    return CalibrationResult(pi_hat, y_hat, lams, screens, failures)


# ---------------------------------------------------------------------------
# Stage 2


@dataclass
class StackedNodeProblem:
    """Unprojected stacked regression for one node.

    ``z_hat`` has blocks ``[Yhat1_-i, Yhat1_-i; Yhat2_-i, -Yhat2_-i]`` so the
    first half of the coefficients are average effects and the second half
    differential effects.
    """

    node: int
    response: np.ndarray
    z_hat: np.ndarray
    anchors1: np.ndarray
    anchors2: np.ndarray
    n1: int

    @property
    def groups(self) -> np.ndarray:
        n = self.response.size
        return np.r_[np.ones(self.n1, dtype=int), np.full(n - self.n1, 2)]

    def projected(self):
        """``(H y, H z_hat)`` with ``H = diag(H1, H2)`` built from the anchor blocks."""
        n1 = self.n1
        h1 = AnchorProjector(self.anchors1)
        h2 = AnchorProjector(self.anchors2)
        y = np.concatenate([h1.apply(self.response[:n1]), h2.apply(self.response[n1:])])
        z = np.vstack([h1.apply(self.z_hat[:n1]), h2.apply(self.z_hat[n1:])])
        return y, z


def _others(p, i):
    return np.r_[0:i, i + 1:p]


def stacked_problem(i: int, pair: ObservationPair, calib: CalibrationResult) -> StackedNodeProblem:
    p = pair.p
    oth = _others(p, i)
    yh1 = calib.y_hat[1][:, oth]
    yh2 = calib.y_hat[2][:, oth]
    z = np.block([[yh1, yh1], [yh2, -yh2]])
    resp = np.concatenate([pair.y1[:, i], pair.y2[:, i]])
    a1 = pair.x1[:, list(pair.anchors1[i])]
    a2 = pair.x2[:, list(pair.anchors2[i])]
    return StackedNodeProblem(i, resp, z, a1, a2, pair.n1)


def _fit_kwargs(cfg: RunConfig, i: int, n: int):
    return dict(
        folds=cfg.cv_folds,
        seed=[int(cfg.seed), int(i)],
        n_lambda=cfg.n_lambda,
        lambda_min_ratio=cfg.lambda_min_ratio,
        ridge_grid=default_ridge_grid(n, cfg.ridge_grid_size),
        epsilon=cfg.epsilon,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        stop_rise=cfg.cv_stop_rise,
        cv_rule=cfg.cv_rule,
    )


def _theory_scale(weights, d, p, n_min):
    # unit-constant version of the rate prescribed for the penalty
    return math.sqrt(max(d, 1) * math.log(max(p, 2)) / n_min) / float(np.min(weights))


def construct_node(i: int, pair: ObservationPair, calib: CalibrationResult, config: RunConfig | None = None):
    """Stage 2 for node ``i``; returns ``(beta_plus_i, beta_minus_i, tuning)``.

    The coefficient vectors have length ``p - 1`` and follow node order with
    ``i`` removed.
    """
    cfg = config or RunConfig()
    p = pair.p
    if p == 1:
        return np.zeros(0), np.zeros(0), NodeTuning(node=i)
    prob = stacked_problem(i, pair, calib)
    y, z = prob.projected()
    fit = tuned_adalasso(z, y, groups=prob.groups, **_fit_kwargs(cfg, i, y.size))
    n_min = min(pair.n1, pair.n2)
    d = cfg.screen_d or (pair.q if pair.q <= n_min else default_screen_size(n_min))
    log.debug("node %d: lambda %.4g (max %.4g), theory scale %.4g", i, fit.lam, fit.lam_max,
              _theory_scale(fit.weights, d, p, n_min))
    tuning = NodeTuning(node=i, lam=fit.lam, lam_max=fit.lam_max, init_ridge_lambda=fit.init_ridge_lambda,
                        weights=fit.weights, iterations=fit.iterations, converged=fit.converged)
    if not fit.converged:
        tuning.message = "coordinate descent did not converge"
    half = p - 1
    return fit.beta[:half], fit.beta[half:], tuning


def _stage2_task(shared, i):
    pair, calib, cfg = shared
    try:
        return i, *construct_node(i, pair, calib, cfg), None
    except Exception as exc:
        return i, None, None, None, f"{type(exc).__name__}: {exc}"


def resolve_targets(pair: ObservationPair, targets) -> list[int]:
    if targets is None:
        return list(range(pair.p))
    out = []
    for t in targets:
        if isinstance(t, str) and not t.lstrip("-").isdigit():
            if t not in pair.node_names:
                raise ValueError(f"unknown target node {t!r}")
            out.append(pair.node_names.index(t))
        else:
            t = int(t)
            if not 0 <= t < pair.p:
                raise ValueError(f"target index {t} out of range")
            out.append(t)
    return sorted(set(out))


def estimate_phi(pair: ObservationPair, gamma1, gamma2):
    """Anchor effects by least squares of each node's structural residual on its anchors."""
    out = {}
    for k, gamma in ((1, gamma1), (2, gamma2)):
        y, x, anchors = pair.network(k)
        resid = y - y @ gamma
        rows, cols, vals = [], [], []
        for i, a in enumerate(anchors):
            if not a:
                continue
            coef = ols_fit(x[:, list(a)], resid[:, i])
            rows.extend(a)
            cols.extend([i] * len(a))
            vals.extend(coef)
        out[k] = sparse.csc_matrix((vals, (rows, cols)), shape=(pair.q, pair.p))
    return out[1], out[2]


@dataclass
class RunResult:
    estimate: DifferentialEstimate
    report: EdgeReport
    calibration: CalibrationResult
    failures: list
    targets: list


def rednet_run(pair: ObservationPair, config: RunConfig | None = None, calibration=None) -> RunResult:
    """Run both stages and classify every edge."""
    cfg = config or RunConfig()
    require_valid_anchors(pair, cfg.permissive_anchors)
    calib = calibration if calibration is not None else calibrate_all(pair, cfg)
    targets = resolve_targets(pair, cfg.targets)
    p = pair.p
    outcomes = pmap(_stage2_task, targets, (pair, calib, cfg), max(1, cfg.threads))
    bp = np.zeros((p, p))
    bm = np.zeros((p, p))
    tuning, failures = [], list(calib.failures)
    for i, bpi, bmi, tun, err in outcomes:
        if err is not None:
            failures.append(NodeFailure(i, None, err))
            tuning.append(NodeTuning(node=i, failed=True, converged=False, message=err))
            continue
        oth = _others(p, i)
        bp[oth, i] = bpi
        bm[oth, i] = bmi
        tuning.append(tun)
    if failures and cfg.strict:
        raise PipelineError(failures)
    phi1 = phi2 = None
    if cfg.estimate_phi:
        phi1, phi2 = estimate_phi(pair, bp + bm, bp - bm)
    est = DifferentialEstimate(bp, bm, tuple(tuning), phi1, phi2)
    report = classify_edges(est, cfg.classify_tol, pair.node_names)
    return RunResult(est, report, calib, failures, targets)


# ---------------------------------------------------------------------------
# baseline: each network on its own


def _naive_task(shared, i):
    pair, calib, cfg = shared
    p = pair.p
    oth = _others(p, i)
    res = []
    for k in (1, 2):
        y, x, anchors = pair.network(k)
        try:
            h = AnchorProjector(x[:, list(anchors[i])])
            z = h.apply(calib.y_hat[k][:, oth])
            r = h.apply(y[:, i])
            fit = tuned_adalasso(z, r, **_fit_kwargs(cfg, i, r.size))
            tun = NodeTuning(node=i, lam=fit.lam, lam_max=fit.lam_max, init_ridge_lambda=fit.init_ridge_lambda,
                             weights=fit.weights, iterations=fit.iterations, converged=fit.converged)
            res.append((fit.beta, tun, None))
        except Exception as exc:
            res.append((None, None, f"{type(exc).__name__}: {exc}"))
    return i, res


def naive_labels(gamma1, gamma2, tol: float = 0.0) -> np.ndarray:
    """Differential when presence or sign differs, common when both agree."""
    s1 = np.where(np.abs(gamma1) > tol, np.sign(gamma1), 0)
    s2 = np.where(np.abs(gamma2) > tol, np.sign(gamma2), 0)
    labels = np.zeros(gamma1.shape, dtype=np.int8)
    labels[(s1 != 0) & (s1 == s2)] = COMMON
    labels[s1 != s2] = DIFFERENTIAL
    np.fill_diagonal(labels, 0)
    return labels


@dataclass
class NaiveResult:
    gamma1: np.ndarray
    gamma2: np.ndarray
    report: EdgeReport
    tuning1: list
    tuning2: list
    failures: list


def naive_run(pair: ObservationPair, config: RunConfig | None = None, calibration=None) -> NaiveResult:
    """Estimate each network separately and compare the two edge sets."""
    cfg = config or RunConfig()
    require_valid_anchors(pair, cfg.permissive_anchors)
    calib = calibration if calibration is not None else calibrate_all(pair, cfg)
    targets = resolve_targets(pair, cfg.targets)
    p = pair.p
    outcomes = pmap(_naive_task, targets, (pair, calib, cfg), max(1, cfg.threads)) if p > 1 else []
    g = {1: np.zeros((p, p)), 2: np.zeros((p, p))}
    tunings = {1: [], 2: []}
    failures = list(calib.failures)
    for i, res in outcomes:
        oth = _others(p, i)
        for k, (beta, tun, err) in zip((1, 2), res):
            if err is not None:
                failures.append(NodeFailure(i, k, err))
                tunings[k].append(NodeTuning(node=i, failed=True, converged=False, message=err))
                continue
            g[k][oth, i] = beta
            tunings[k].append(tun)
    if failures and cfg.strict:
        raise PipelineError(failures)
    bp, bm = reparameterize(g[1], g[2])
    report = EdgeReport(
        node_names=pair.node_names,
        labels=naive_labels(g[1], g[2], cfg.classify_tol),
        beta_plus=bp,
        beta_minus=bm,
        gamma1=g[1],
        gamma2=g[2],
    )
    return NaiveResult(g[1], g[2], report, tunings[1], tunings[2], failures)
