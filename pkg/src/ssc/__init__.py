"""Smooth sparse coding: kernel-weighted dictionary learning with marginal regression.

Set ``SSC_DISABLE_NUMBA=1`` before import to run the pure-numpy kernels.
"""

from ._accel import BACKEND
from .coding import code_all, code_all_lasso, code_all_mr, project_l1_ball, threshold_top_s
from .dictionary import UpdatePenalties, babel, dictionary_update, incoherence, init_dictionary
from .features import fisher_ratio, fisher_scores, max_pool, train_linear_classifier, classify
from .kernels import KernelSpec, TemporalKernel, compute_spatiotemporal_weights, compute_weights, eval_kernel
from .theory import BoundParams, covering_log_cardinality, generalization_gap_fast, generalization_gap_slow
from .trainer import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundParams",
    "KernelSpec",
    "TemporalKernel",
    "TrainConfig",
    "TrainResult",
    "UpdatePenalties",
    "babel",
    "classify",
    "code_all",
    "code_all_lasso",
    "code_all_mr",
    "compute_spatiotemporal_weights",
    "compute_weights",
    "covering_log_cardinality",
    "dictionary_update",
    "eval_kernel",
    "fisher_ratio",
    "fisher_scores",
    "generalization_gap_fast",
    "generalization_gap_slow",
    "incoherence",
    "init_dictionary",
    "max_pool",
    "project_l1_ball",
    "threshold_top_s",
    "train",
    "train_linear_classifier",
]
