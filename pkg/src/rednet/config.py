"""Run configuration shared by the pipeline, bootstrap and CLI."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .solver import DEFAULT_MAX_ITER, DEFAULT_STOP_RISE, DEFAULT_TOL


@dataclass(frozen=True)
class RunConfig:
    screen_d: int | None = None  # None: floor(n ** 0.9)
    screen_rounds: int = 1
    ridge_grid_size: int = 50
    cv_folds: int = 10
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    cv_rule: str = "min"  # "min" (argmin of the CV curve) or "1se"
    cv_stop_rise: float | None = DEFAULT_STOP_RISE  # None: walk the whole grid
    epsilon: float | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    classify_tol: float = 0.0
    seed: int = 0
    threads: int = 1
    strict: bool = True
    permissive_anchors: bool = False
    targets: tuple | None = None  # node indices or names; None means all nodes
    estimate_phi: bool = False

    def __post_init__(self):
        if self.cv_rule not in ("min", "1se"):
            raise ValueError(f"cv_rule must be 'min' or '1se', got {self.cv_rule!r}")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["targets"] is not None:
            d["targets"] = list(d["targets"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown run options: {sorted(unknown)}")
        d = dict(d)
        if d.get("targets") is not None:
            d["targets"] = tuple(d["targets"])
        return cls(**d)
