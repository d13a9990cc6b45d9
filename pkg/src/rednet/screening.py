"""Marginal screening of exogenous variables for one endogenous node."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class ScreenSet:
    node: int
    network: int
    selected: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return self.selected.size


def default_screen_size(n: int) -> int:
    """``floor(n ** 0.9)``, at least 1."""
    return max(1, int(math.floor(n ** 0.9)))


def marginal_scores(x, y):
    """``sqrt(n) |corr(x_j, y)| ||y - mean(y)||`` for every column.

    This is ``|x_j' y|`` for columns that are centered with norm ``sqrt(n)``
    and ranks like the absolute marginal correlation otherwise. Constant
    columns score 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    raw = np.sqrt(np.einsum("ij,ij->j", x, x))
    flat = norms <= 1e-12 * np.maximum(raw, 1e-300)
    score = np.abs(xc.T @ (y - y.mean())) * math.sqrt(n) / np.where(flat, 1.0, norms)
    score[flat] = 0.0
    return score


def sis_rank(x, y):
    """Rank columns by marginal score descending, ties by ascending index.

    Returns ``(order, scores)`` where ``scores[k]`` belongs to column
    ``order[k]``.
    """
    score = marginal_scores(x, y)
    order = np.argsort(-score, kind="stable")
    return order, score[order]


def _iterative_select(x, y, d, rounds):
    n, q = x.shape
    chosen: list[int] = []
    resid = np.asarray(y, dtype=float)
    per_round = -(-d // rounds)
    for r in range(rounds):
        take = min(per_round, d - len(chosen))
        if take <= 0:
            break
        score = marginal_scores(x, resid)
        score[chosen] = -np.inf
        order = np.argsort(-score, kind="stable")
        chosen.extend(int(j) for j in order[:take])
        if r + 1 < rounds:
            xs = x[:, chosen]
            coef, *_ = linalg.lstsq(xs, y, check_finite=False)
            resid = y - xs @ coef
    return np.asarray(chosen, dtype=np.intp)


def sis_select(x, y, d: int | None = None, node: int = -1, network: int = 0, rounds: int = 1) -> ScreenSet:
    """Keep the ``d`` columns with the largest marginal scores.

    When ``q <= n`` no screening happens and all columns are returned. With
    ``rounds > 1`` the selection is built in rounds, each re-screening
    against the least-squares residual of the columns picked so far.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, q = x.shape
    if d is None:
        d = default_screen_size(n)
    order, scores = sis_rank(x, y)
    if q <= n:
        return ScreenSet(node, network, order, scores)
    if not 1 <= d <= q:
        raise ValueError(f"screen size d={d} outside [1, {q}]")
    if rounds <= 1:
        return ScreenSet(node, network, order[:d].copy(), scores[:d].copy())
    chosen = _iterative_select(x, y, d, rounds)
    marg = marginal_scores(x[:, chosen], y)
    o = np.lexsort((chosen, -marg))
    return ScreenSet(node, network, chosen[o], marg[o])
