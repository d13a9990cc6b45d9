"""Synthetic paired networks with known common and differential edges."""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import standardize_columns
from .model import ObservationPair, SemModel

# truth codes for ordered pairs
T_ABSENT, T_COMMON, T_OPPOSITE, T_UNIQUE1, T_UNIQUE2 = range(5)
TRUTH_LABELS = ("absent", "common", "differential-opposite", "differential-unique-1",
                "differential-unique-2")


@dataclass(frozen=True)
class PairConfig:
    p_total: int = 50
    sub_p: int | None = None
    avg_degree: float = 1.0
    acyclic: bool = True
    n_opposite: int = 5
    n_unique_each: int = 5
    effect_range: tuple[float, float] = (0.3, 0.8)
    noise_sd: float = 0.1
    genotype_probs: tuple[float, float, float] = (0.25, 0.5, 0.25)
    shared_x: bool = False
    n1: int = 200
    n2: int = 200
    stability_floor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "effect_range", tuple(float(v) for v in self.effect_range))
        object.__setattr__(self, "genotype_probs", tuple(float(v) for v in self.genotype_probs))
        lo, hi = self.effect_range
        if not 0 < lo < hi:
            raise ValueError("effect_range must satisfy 0 < lo < hi")
        if abs(sum(self.genotype_probs) - 1.0) > 1e-12 or min(self.genotype_probs) < 0:
            raise ValueError("genotype_probs must be a probability vector")
        if self.sub_p is not None and not 0 < self.sub_p <= self.p_total:
            raise ValueError("sub_p must lie in [1, p_total]")
        if self.noise_sd < 0 or self.n1 < 1 or self.n2 < 1:
            raise ValueError("noise_sd must be >= 0 and sample sizes positive")
        if self.shared_x and self.n1 != self.n2:
            raise ValueError("shared_x requires n1 == n2")

    @property
    def subnet_size(self) -> int:
        return self.p_total if self.sub_p is None else self.sub_p

    def to_dict(self) -> dict:
        d = asdict(self)
        d["effect_range"] = list(self.effect_range)
        d["genotype_probs"] = list(self.genotype_probs)
        return d


@dataclass
class Topology:
    order: np.ndarray
    common: list
    opposite: list
    unique1: list
    unique2: list

    def support(self, k: int, p: int) -> np.ndarray:
        s = np.zeros((p, p), dtype=bool)
        extra = self.unique1 if k == 1 else self.unique2
        for u, v in self.common + self.opposite + extra:
            s[u, v] = True
        return s


@dataclass(frozen=True)
class TruthLabels:
    """True effects of both networks and per-edge truth codes.

    ``codes[j, i]`` describes the edge ``j -> i``; ``scored`` lists the nodes
    of the subnetwork whose ordered pairs are evaluated.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    codes: np.ndarray
    scored: np.ndarray
    node_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.node_names:
            object.__setattr__(self, "node_names", tuple(f"Y{i}" for i in range(self.gamma1.shape[0])))

    @property
    def p(self) -> int:
        return self.gamma1.shape[0]

    def scored_mask(self, full: bool = False) -> np.ndarray:
        p = self.p
        if full:
            mask = np.ones((p, p), dtype=bool)
        else:
            mask = np.zeros((p, p), dtype=bool)
            mask[np.ix_(self.scored, self.scored)] = True
        np.fill_diagonal(mask, False)
        return mask

    def count(self, label: str, full: bool = False) -> int:
        code = TRUTH_LABELS.index(label)
        return int(((self.codes == code) & self.scored_mask(full)).sum())

    def n_differential(self, full: bool = False) -> int:
        m = self.scored_mask(full)
        return int(((self.codes >= T_OPPOSITE) & m).sum())


def _sample_pairs(candidates, k, rng):
    if k > len(candidates):
        raise ValueError(f"cannot place {k} edges among {len(candidates)} candidate pairs")
    idx = rng.choice(len(candidates), size=k, replace=False)
    return [candidates[t] for t in idx]


def _reachable(p, edges, src):
    adj = [[] for _ in range(p)]
    for u, v in edges:
        adj[u].append(v)
    seen = np.zeros(p, dtype=bool)
    dq = deque([src])
    while dq:
        u = dq.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                dq.append(v)
    return seen


def gen_topology(cfg: PairConfig, rng) -> Topology:
    """Draw the shared, opposite-sign and network-specific edge sets.

    Edges point from earlier to later nodes of a random ordering; in cyclic
    mode one common back-edge is then added inside the subnetwork so that a
    directed cycle exists in both networks.
    """
    p, sp = cfg.p_total, cfg.subnet_size
    k_sub = int(round(cfg.avg_degree * sp))
    need = cfg.n_opposite + cfg.n_unique_each
    if k_sub < need:
        raise ValueError(
            f"subnetwork of {sp} nodes with degree {cfg.avg_degree} has {k_sub} edges, "
            f"fewer than the {need} differential edges each network needs"
        )
    order = rng.permutation(p)
    rank = np.empty(p, dtype=int)
    rank[order] = np.arange(p)
    sub_cands = [(u, v) for u in range(sp) for v in range(sp) if u != v and rank[u] < rank[v]]
    n_shared = k_sub - cfg.n_unique_each
    drawn = _sample_pairs(sub_cands, n_shared + 2 * cfg.n_unique_each, rng)
    shared = drawn[:n_shared]
    opposite = shared[: cfg.n_opposite]
    common = shared[cfg.n_opposite:]
    unique1 = drawn[n_shared: n_shared + cfg.n_unique_each]
    unique2 = drawn[n_shared + cfg.n_unique_each:]
    if sp < p:
        k_out = int(round(cfg.avg_degree * (p - sp)))
        out_cands = [(u, v) for v in range(sp, p) for u in range(p) if u != v and rank[u] < rank[v]]
        common = common + _sample_pairs(out_cands, k_out, rng)
    if not cfg.acyclic:
        sub_shared = [e for e in shared]
        existing = set(common + opposite + unique1 + unique2)
        backs = []
        for u in range(sp):
            reach = _reachable(sp, sub_shared, u)
            for v in np.flatnonzero(reach):
                if v != u and (v, u) not in existing:
                    backs.append((int(v), u))
        if not backs:
            raise ValueError("no shared path in the subnetwork to close into a cycle")
        common = common + [backs[rng.integers(len(backs))]]
    return Topology(order, common, opposite, unique1, unique2)


def _magnitudes(rng, k, effect_range):
    lo, hi = effect_range
    return rng.uniform(lo, hi, size=k) * rng.choice((-1.0, 1.0), size=k)


def check_stability(gamma) -> float:
    """Smallest singular value of ``I - gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise ValueError("gamma must be square")
    return float(np.linalg.svd(np.eye(gamma.shape[0]) - gamma, compute_uv=False)[-1])


def sample_effects(topo: Topology, cfg: PairConfig, rng, max_tries: int = 1000):
    """Draw effect values; returns ``(gamma1, gamma2, truth)``.

    Cyclic draws are redrawn until ``I - gamma`` clears the stability floor in
    both networks.
    """
    p, sp = cfg.p_total, cfg.subnet_size
    for _ in range(max_tries):
        g1 = np.zeros((p, p))
        g2 = np.zeros((p, p))
        codes = np.zeros((p, p), dtype=np.int8)
        for (u, v), val in zip(topo.common, _magnitudes(rng, len(topo.common), cfg.effect_range)):
            g1[u, v] = g2[u, v] = val
            codes[u, v] = T_COMMON
        for (u, v), val in zip(topo.opposite, _magnitudes(rng, len(topo.opposite), cfg.effect_range)):
            g1[u, v], g2[u, v] = val, -val
            codes[u, v] = T_OPPOSITE
        for (u, v), val in zip(topo.unique1, _magnitudes(rng, len(topo.unique1), cfg.effect_range)):
            g1[u, v] = val
            codes[u, v] = T_UNIQUE1
        for (u, v), val in zip(topo.unique2, _magnitudes(rng, len(topo.unique2), cfg.effect_range)):
            g2[u, v] = val
            codes[u, v] = T_UNIQUE2
        if cfg.acyclic or min(check_stability(g1), check_stability(g2)) >= cfg.stability_floor:
            truth = TruthLabels(g1, g2, codes, np.arange(sp))
            return g1, g2, truth
    raise RuntimeError("could not draw a stable cyclic network; lower the effect range")


def gen_anchors_and_phi(cfg: PairConfig, rng):
    """One anchor per node (exogenous column ``i`` drives node ``i``).

    Returns ``(anchors, phi1, phi2)``; the two networks get independent draws.
    """
    p = cfg.p_total
    anchors = [(i,) for i in range(p)]
    phi1 = np.diag(_magnitudes(rng, p, cfg.effect_range))
    phi2 = np.diag(_magnitudes(rng, p, cfg.effect_range))
    return anchors, phi1, phi2


def sample_genotypes(n, q, rng, probs=(0.25, 0.5, 0.25)) -> np.ndarray:
    return rng.choice(3, size=(n, q), p=probs).astype(float)


def sample_data(model: SemModel, n: int, rng, x_raw=None, genotype_probs=(0.25, 0.5, 0.25),
                stability_floor: float = 0.0):
    """Draw ``(y, x_std, x_raw)`` through the reduced form.

    ``Y (I - gamma) = X phi + E`` is solved directly; ``x_raw`` is reused when
    given (shared exogenous data), otherwise sampled as genotypes.
    """
    p = model.p
    q = model.phi.shape[0]
    smin = check_stability(model.gamma)
    if smin <= max(stability_floor, 1e-10):
        raise np.linalg.LinAlgError(f"I - gamma is near singular (smallest singular value {smin:.3g})")
    if x_raw is None:
        x_raw = sample_genotypes(n, q, rng, genotype_probs)
    else:
        x_raw = np.asarray(x_raw, dtype=float)
        n = x_raw.shape[0]
    e = rng.standard_normal((n, p)) * model.sigma
    rhs = x_raw @ model.phi + e
    y = np.linalg.solve((np.eye(p) - model.gamma).T, rhs.T).T
    x_std, _ = standardize_columns(x_raw)
    return y, x_std, x_raw


@dataclass
class SimulatedPair:
    pair: ObservationPair
    model1: SemModel
    model2: SemModel
    truth: TruthLabels
    x_raw1: np.ndarray
    x_raw2: np.ndarray
    config: PairConfig


def simulate_pair(cfg: PairConfig) -> SimulatedPair:
    """Full generator: topology, effects, anchors, then data for both networks."""
    rng = np.random.default_rng(cfg.seed)
    topo = gen_topology(cfg, rng)
    g1, g2, truth = sample_effects(topo, cfg, rng)
    anchors, phi1, phi2 = gen_anchors_and_phi(cfg, rng)
    m1 = SemModel(g1, phi1, np.full(cfg.p_total, cfg.noise_sd))
    m2 = SemModel(g2, phi2, np.full(cfg.p_total, cfg.noise_sd))
    y1, _, xr1 = sample_data(m1, cfg.n1, rng, genotype_probs=cfg.genotype_probs)
    if cfg.shared_x:
        y2, _, xr2 = sample_data(m2, cfg.n2, rng, x_raw=xr1)
    else:
        y2, _, xr2 = sample_data(m2, cfg.n2, rng, genotype_probs=cfg.genotype_probs)
    pair = ObservationPair.from_arrays(y1, xr1, y2, xr2, anchors, anchors)
    truth = TruthLabels(truth.gamma1, truth.gamma2, truth.codes, truth.scored, pair.node_names)
    return SimulatedPair(pair, m1, m2, truth, xr1, xr2, cfg)
