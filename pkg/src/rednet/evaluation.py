"""Scoring against ground truth and bootstrap stability of edge calls."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .config import RunConfig
from .model import COMMON, DIFFERENTIAL, EdgeReport, ObservationPair
from .synthgen import TruthLabels

CATEGORIES = ("differential", "common", "average")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int
    category: str

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _truth_positive(truth: TruthLabels, category: str) -> np.ndarray:
    g1, g2 = truth.gamma1, truth.gamma2
    if category == "differential":
        return g1 != g2
    if category == "common":
        return (g1 == g2) & (g1 != 0)
    if category == "average":
        return (g1 + g2) != 0
    raise ValueError(f"unknown category {category!r}")


def _estimate_positive(est: EdgeReport, category: str) -> np.ndarray:
    if category == "differential":
        return est.labels == DIFFERENTIAL
    if category == "common":
        return est.labels == COMMON
    if category == "average":
        return est.beta_plus != 0
    raise ValueError(f"unknown category {category!r}")


def _aligned(est: EdgeReport, truth: TruthLabels) -> EdgeReport:
    if tuple(est.node_names) == tuple(truth.node_names):
        return est
    if sorted(est.node_names) != sorted(truth.node_names):
        raise ValueError("estimate and truth cover different node sets")
    idx = np.array([est.node_names.index(nm) for nm in truth.node_names])
    ix = np.ix_(idx, idx)
    return EdgeReport(
        node_names=tuple(truth.node_names),
        labels=est.labels[ix],
        beta_plus=est.beta_plus[ix],
        beta_minus=est.beta_minus[ix],
        gamma1=est.gamma1[ix],
        gamma2=est.gamma2[ix],
        boot_freq=None if est.boot_freq is None else est.boot_freq[ix],
    )


def confusion(est: EdgeReport, truth: TruthLabels, category: str, full: bool = False) -> ConfusionCounts:
    """Confusion counts over scored ordered pairs (the subnetwork unless ``full``)."""
    est = _aligned(est, truth)
    mask = truth.scored_mask(full)
    t = _truth_positive(truth, category)[mask]
    e = _estimate_positive(est, category)[mask]
    return ConfusionCounts(
        tp=int(np.sum(t & e)),
        tn=int(np.sum(~t & ~e)),
        fp=int(np.sum(~t & e)),
        fn=int(np.sum(t & ~e)),
        category=category,
    )


def mcc(c: ConfusionCounts) -> float | None:
    """Matthews correlation; ``None`` when any margin is empty."""
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        return None
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)


def fdr(c: ConfusionCounts) -> float | None:
    if c.tp + c.fp == 0:
        return None
    return c.fp / (c.tp + c.fp)


def power(c: ConfusionCounts) -> float | None:
    if c.tp + c.fn == 0:
        return None
    return c.tp / (c.tp + c.fn)


METRICS = {"mcc": mcc, "fdr": fdr, "power": power}


def metrics_table(est: EdgeReport, truth: TruthLabels, full: bool = False) -> list[dict]:
    """One row per category and metric; undefined values stay ``None``."""
    rows = []
    for cat in CATEGORIES:
        c = confusion(est, truth, cat, full)
        for name, fn in METRICS.items():
            rows.append({"category": cat, "metric": name, "value": fn(c),
                         "tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn})
    return rows


# ---------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapResult:
    freq_common: np.ndarray
    freq_differential: np.ndarray
    thresholds: tuple
    n_boot: int
    n_failed: int
    node_names: tuple

    def summary(self) -> dict[str, list[int]]:
        """Edges called in more than each threshold fraction of replicates."""
        p = len(self.node_names)
        off = ~np.eye(p, dtype=bool)
        out = {}
        for label, freq in (("common", self.freq_common), ("differential", self.freq_differential)):
            out[label] = [int(np.sum((freq > t) & off)) for t in self.thresholds]
        return out


def _replicate_seed(master: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(r)])


def _boot_task(shared, r):
    from .pipeline import rednet_run

    pair, cfg, master = shared
    ss = _replicate_seed(master, r)
    rng = np.random.default_rng(ss)
    rows1 = rng.integers(0, pair.n1, size=pair.n1)
    rows2 = rng.integers(0, pair.n2, size=pair.n2)
    run_seed = int(ss.generate_state(1)[0])
    try:
        res = rednet_run(pair.resampled(rows1, rows2), cfg.replace(seed=run_seed, threads=1))
    except Exception as exc:
        return r, None, f"{type(exc).__name__}: {exc}"
    return r, res.report.labels, None


def bootstrap_stability(pair: ObservationPair, config: RunConfig | None = None, n_boot: int = 100,
                        thresholds=(0.7, 0.8, 0.9), seed: int | None = None) -> BootstrapResult:
    """Resample subjects within each network and rerun the estimator.

    Replicate ``r`` draws its rows and its cross-validation seed from
    ``(seed, r)`` so results do not depend on the worker count.
    """
    cfg = config or RunConfig()
    if n_boot < 1:
        raise ValueError("n_boot must be at least 1")
    master = cfg.seed if seed is None else seed
    outcomes = pmap(_boot_task, range(n_boot), (pair, cfg, master), max(1, cfg.threads))
    p = pair.p
    cnt_c = np.zeros((p, p))
    cnt_d = np.zeros((p, p))
    failed = 0
    for r, labels, err in outcomes:
        if err is not None:
            failed += 1
            continue
        cnt_c += labels == COMMON
        cnt_d += labels == DIFFERENTIAL
    ok = n_boot - failed
    if failed > 0.05 * n_boot:
        warnings.warn(f"{failed} of {n_boot} bootstrap replicates failed and were excluded", stacklevel=2)
    if ok == 0:
        raise RuntimeError("every bootstrap replicate failed")
    return BootstrapResult(cnt_c / ok, cnt_d / ok, tuple(float(t) for t in thresholds), n_boot, failed,
                           pair.node_names)
