"""Domain types for paired structural equation models.

Conventions used throughout the package: effect matrices are ``p x p`` with
column ``i`` holding the incoming effects of node ``i``, so ``gamma[j, i]`` is
the effect of node ``j`` on node ``i`` (the directed edge ``j -> i``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .kernels import standardize_columns

LABELS = ("absent", "common", "differential")
ABSENT, COMMON, DIFFERENTIAL = 0, 1, 2


class AnchorError(ValueError):
    """Anchor sets violate the identifiability requirement."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_index_sets(anchors: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(j) for j in s) for s in anchors)


@dataclass(frozen=True)
class ObservationPair:
    """Observed data for the two networks plus per-node anchor sets.

    ``x1``/``x2`` are stored standardized (column norm ``sqrt(n)``); the scale
    factors that undo this are kept in ``x_scales1``/``x_scales2``.
    """

    y1: np.ndarray
    x1: np.ndarray
    y2: np.ndarray
    x2: np.ndarray
    anchors1: tuple[tuple[int, ...], ...]
    anchors2: tuple[tuple[int, ...], ...]
    node_names: tuple[str, ...]
    exo_names: tuple[str, ...]
    x_scales1: np.ndarray = field(default=None, repr=False)
    x_scales2: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_arrays(
        cls,
        y1,
        x1,
        y2,
        x2,
        anchors1,
        anchors2=None,
        node_names=None,
        exo_names=None,
        standardize: bool = True,
    ) -> "ObservationPair":
        """Build a pair, standardizing the exogenous columns unless told not to."""
        y1, y2 = np.atleast_2d(np.asarray(y1, float)), np.atleast_2d(np.asarray(y2, float))
        x1, x2 = np.atleast_2d(np.asarray(x1, float)), np.atleast_2d(np.asarray(x2, float))
        if anchors2 is None:
            anchors2 = anchors1
        p, q = y1.shape[1], x1.shape[1]
        if node_names is None:
            node_names = [f"Y{i}" for i in range(p)]
        if exo_names is None:
            exo_names = [f"X{j}" for j in range(q)]
        if standardize:
            x1, s1 = standardize_columns(x1)
            x2, s2 = standardize_columns(x2)
        else:
            s1, s2 = np.ones(q), np.ones(x2.shape[1])
        return cls(
            y1=y1,
            x1=x1,
            y2=y2,
            x2=x2,
            anchors1=_as_index_sets(anchors1),
            anchors2=_as_index_sets(anchors2),
            node_names=tuple(str(s) for s in node_names),
            exo_names=tuple(str(s) for s in exo_names),
            x_scales1=s1,
            x_scales2=s2,
        )

    def __post_init__(self):
        for name in ("y1", "x1", "y2", "x2"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        for name in ("x_scales1", "x_scales2"):
            val = getattr(self, name)
            q = self.x1.shape[1]
            object.__setattr__(self, name, _freeze(np.ones(q) if val is None else val))
        object.__setattr__(self, "anchors1", _as_index_sets(self.anchors1))
        object.__setattr__(self, "anchors2", _as_index_sets(self.anchors2))
        if self.y1.shape[1] != self.y2.shape[1]:
            raise ValueError("y1 and y2 must have the same number of columns")
        if self.x1.shape[1] != self.x2.shape[1]:
            raise ValueError("x1 and x2 must have the same number of columns")
        if self.y1.shape[0] != self.x1.shape[0] or self.y2.shape[0] != self.x2.shape[0]:
            raise ValueError("Y and X of a network must have the same number of rows")
        p, q = self.p, self.q
        if len(self.anchors1) != p or len(self.anchors2) != p:
            raise ValueError(f"expected {p} anchor sets per network")
        for anchors in (self.anchors1, self.anchors2):
            for s in anchors:
                for j in s:
                    if not 0 <= j < q:
                        raise ValueError(f"anchor index {j} outside [0, {q})")
        if len(self.node_names) != p or len(self.exo_names) != q:
            raise ValueError("name lists do not match matrix dimensions")

    @property
    def p(self) -> int:
        return self.y1.shape[1]

    @property
    def q(self) -> int:
        return self.x1.shape[1]

    @property
    def n1(self) -> int:
        return self.y1.shape[0]

    @property
    def n2(self) -> int:
        return self.y2.shape[0]

    def network(self, k: int):
        """Return ``(y, x, anchors)`` for network ``k`` in {1, 2}."""
        if k == 1:
            return self.y1, self.x1, self.anchors1
        if k == 2:
            return self.y2, self.x2, self.anchors2
        raise ValueError("network must be 1 or 2")

    def swapped(self) -> "ObservationPair":
        """The same pair with the two network slots exchanged."""
        return ObservationPair(
            y1=self.y2, x1=self.x2, y2=self.y1, x2=self.x1,
            anchors1=self.anchors2, anchors2=self.anchors1,
            node_names=self.node_names, exo_names=self.exo_names,
            x_scales1=self.x_scales2, x_scales2=self.x_scales1,
        )

    def resampled(self, rows1: np.ndarray, rows2: np.ndarray) -> "ObservationPair":
        """Row-resampled copy; X is re-standardized so the column-norm invariant holds."""
        x1, s1 = standardize_columns(self.x1[rows1])
        x2, s2 = standardize_columns(self.x2[rows2])
        return ObservationPair(
            y1=self.y1[rows1], x1=x1, y2=self.y2[rows2], x2=x2,
            anchors1=self.anchors1, anchors2=self.anchors2,
            node_names=self.node_names, exo_names=self.exo_names,
            x_scales1=self.x_scales1 * s1, x_scales2=self.x_scales2 * s2,
        )


@dataclass(frozen=True)
class SemModel:
    """Ground truth for one network: ``Y = Y gamma + X phi + E``."""

    gamma: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        gamma = _freeze(self.gamma)
        phi = _freeze(self.phi)
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = np.full(gamma.shape[0], float(sigma))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma", _freeze(sigma))
        if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
            raise ValueError("gamma must be square")
        if np.any(np.diag(gamma) != 0):
            raise ValueError("gamma must have an exactly zero diagonal")
        if phi.shape[1] != gamma.shape[0]:
            raise ValueError("phi must have one column per node")

    @property
    def p(self) -> int:
        return self.gamma.shape[0]

    def anchor_sets(self) -> list[tuple[int, ...]]:
        return [tuple(np.flatnonzero(self.phi[:, i])) for i in range(self.p)]


@dataclass
class NodeTuning:
    """Per-node record of the Stage-2 fit."""

    node: int
    lam: float = float("nan")
    lam_max: float = float("nan")
    init_ridge_lambda: float = float("nan")
    weights: np.ndarray | None = None
    iterations: int = 0
    converged: bool = True
    failed: bool = False
    message: str = ""


@dataclass(frozen=True)
class DifferentialEstimate:
    """Average (``beta_plus``) and differential (``beta_minus``) effect matrices."""

    beta_plus: np.ndarray
    beta_minus: np.ndarray
    tuning: tuple = ()
    phi_hat1: np.ndarray | None = None
    phi_hat2: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta_plus", _freeze(self.beta_plus))
        object.__setattr__(self, "beta_minus", _freeze(self.beta_minus))
        if self.beta_plus.shape != self.beta_minus.shape:
            raise ValueError("beta_plus and beta_minus shapes differ")

    @property
    def gamma1(self) -> np.ndarray:
        return self.beta_plus + self.beta_minus

    @property
    def gamma2(self) -> np.ndarray:
        return self.beta_plus - self.beta_minus

    @property
    def p(self) -> int:
        return self.beta_plus.shape[0]


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    label: str
    beta_plus: float
    beta_minus: float
    gamma1: float
    gamma2: float
    boot_freq: float | None = None


@dataclass(frozen=True)
class EdgeReport:
    """Edge labels over all ordered node pairs.

    ``labels[j, i]`` is one of ``ABSENT``, ``COMMON``, ``DIFFERENTIAL`` for the
    edge ``j -> i``; the diagonal is always ``ABSENT``.
    """

    node_names: tuple[str, ...]
    labels: np.ndarray
    beta_plus: np.ndarray
    beta_minus: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    boot_freq: np.ndarray | None = None

    @property
    def p(self) -> int:
        return len(self.node_names)

    def edges(self, include_absent: bool = False) -> Iterator[Edge]:
        """Yield edges ordered by (target, source)."""
        p = self.p
        for i in range(p):
            for j in range(p):
                if i == j:
                    continue
                lab = int(self.labels[j, i])
                if lab == ABSENT and not include_absent:
                    continue
                yield Edge(
                    source=self.node_names[j],
                    target=self.node_names[i],
                    label=LABELS[lab],
                    beta_plus=float(self.beta_plus[j, i]),
                    beta_minus=float(self.beta_minus[j, i]),
                    gamma1=float(self.gamma1[j, i]),
                    gamma2=float(self.gamma2[j, i]),
                    boot_freq=None if self.boot_freq is None else float(self.boot_freq[j, i]),
                )

    def count(self, label: str) -> int:
        code = LABELS.index(label)
        mask = self.labels == code
        np.fill_diagonal(mask, False)
        return int(mask.sum())


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def reparameterize(gamma1, gamma2):
    """Map per-network effects to ``(beta_plus, beta_minus)``.

    ``beta_plus`` is the average of the two effects and ``beta_minus`` half
    their difference. Works elementwise on vectors or matrices.
    """
    g1, g2 = _check_pair(gamma1, gamma2)
    return (g1 + g2) / 2.0, (g1 - g2) / 2.0


def recover_gammas(beta_plus, beta_minus):
    """Inverse of :func:`reparameterize`."""
    bp, bm = _check_pair(beta_plus, beta_minus)
    return bp + bm, bp - bm


def label_matrix(beta_plus: np.ndarray, beta_minus: np.ndarray, tol: float = 0.0) -> np.ndarray:
    labels = np.full(beta_plus.shape, ABSENT, dtype=np.int8)
    labels[np.abs(beta_plus) > tol] = COMMON
    labels[np.abs(beta_minus) > tol] = DIFFERENTIAL
    np.fill_diagonal(labels, ABSENT)
    return labels


def classify_edges(est: DifferentialEstimate, tol: float = 0.0, node_names=None) -> EdgeReport:
    """Label every off-diagonal edge as differential, common or absent.

    An edge with a nonzero differential effect is differential regardless of
    its average effect; common requires a nonzero average and a zero
    differential effect.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    p = est.p
    if node_names is None:
        node_names = [f"Y{i}" for i in range(p)]
    g1, g2 = recover_gammas(est.beta_plus, est.beta_minus)
    return EdgeReport(
        node_names=tuple(node_names),
        labels=label_matrix(est.beta_plus, est.beta_minus, tol),
        beta_plus=np.array(est.beta_plus),
        beta_minus=np.array(est.beta_minus),
        gamma1=g1,
        gamma2=g2,
    )


@dataclass(frozen=True)
class AnchorViolation:
    network: int
    kind: str  # "empty" or "shared"
    nodes: tuple[int, ...]
    exo: int | None = None

    def __str__(self):
        if self.kind == "empty":
            return f"network {self.network}: node {self.nodes[0]} has no anchor"
        return (
            f"network {self.network}: nodes {self.nodes[0]} and {self.nodes[1]} "
            f"share anchor {self.exo}"
        )


def validate_anchors(pair: ObservationPair) -> list[AnchorViolation]:
    """Check that anchor sets are nonempty and pairwise disjoint in each network.

    Returns an empty list when the configuration is acceptable.
    """
    violations = []
    for k, anchors in ((1, pair.anchors1), (2, pair.anchors2)):
        owner: dict[int, int] = {}
        for i, s in enumerate(anchors):
            if len(s) == 0:
                violations.append(AnchorViolation(k, "empty", (i,)))
            for j in sorted(set(s)):
                if j in owner:
                    violations.append(AnchorViolation(k, "shared", (owner[j], i), j))
                else:
                    owner[j] = i
    return violations


def require_valid_anchors(pair: ObservationPair, permissive: bool = False) -> None:
    """Raise :class:`AnchorError` on violations, or only warn in permissive mode."""
    violations = validate_anchors(pair)
    if not violations:
        return
    msg = "; ".join(str(v) for v in violations[:10])
    if len(violations) > 10:
        msg += f"; ... ({len(violations)} violations)"
    if permissive:
        warnings.warn(f"anchor check failed: {msg}", stacklevel=2)
    else:
        raise AnchorError(msg)
