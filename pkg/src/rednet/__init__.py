"""Differential analysis of paired directed networks.

Two networks over the same nodes are modelled as structural equation models
``Y = Y Gamma + X Phi + E``. Each node needs at least one anchor, an exogenous
variable that affects it directly. The estimator splits every edge into an
average effect and a differential effect, then labels it common or
differential.
"""
__version__ = "0.1.0"

from ._accel import backend_name
from .config import RunConfig
from .evaluation import (
    BootstrapResult,
    ConfusionCounts,
    bootstrap_stability,
    confusion,
    fdr,
    mcc,
    metrics_table,
    power,
)
from .kernels import (
    AnchorProjector,
    SingularSystemError,
    annihilator,
    gcv_scores,
    gcv_select,
    ols_fit,
    ridge_fit,
    standardize_columns,
)
from .model import (
    AnchorError,
    DifferentialEstimate,
    EdgeReport,
    ObservationPair,
    SemModel,
    classify_edges,
    recover_gammas,
    reparameterize,
    validate_anchors,
)
from .pipeline import (
    CalibrationResult,
    PipelineError,
    calibrate_all,
    construct_node,
    naive_run,
    rednet_run,
)
from .screening import ScreenSet, sis_select
from .solver import AdaLassoProblem, adalasso_fit, adaptive_weights, cv_select_lambda, kkt_residual
from .synthgen import PairConfig, TruthLabels, check_stability, simulate_pair

__all__ = [
    "AdaLassoProblem",
    "AnchorError",
    "AnchorProjector",
    "BootstrapResult",
    "CalibrationResult",
    "ConfusionCounts",
    "DifferentialEstimate",
    "EdgeReport",
    "ObservationPair",
    "PairConfig",
    "PipelineError",
    "RunConfig",
    "ScreenSet",
    "SemModel",
    "SingularSystemError",
    "TruthLabels",
    "adalasso_fit",
    "adaptive_weights",
    "annihilator",
    "backend_name",
    "bootstrap_stability",
    "calibrate_all",
    "check_stability",
    "classify_edges",
    "confusion",
    "construct_node",
    "cv_select_lambda",
    "fdr",
    "gcv_scores",
    "gcv_select",
    "kkt_residual",
    "mcc",
    "metrics_table",
    "naive_run",
    "ols_fit",
    "power",
    "recover_gammas",
    "rednet_run",
    "reparameterize",
    "ridge_fit",
    "simulate_pair",
    "sis_select",
    "standardize_columns",
    "validate_anchors",
]
