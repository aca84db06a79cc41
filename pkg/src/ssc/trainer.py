"""Alternating minimization: coding step, dictionary step, convergence tracking."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np

from .coding import code_all_lasso, code_all_mr
from .dictionary import UpdatePenalties, dictionary_update, incoherence, init_dictionary
from .kernels import KernelSpec, compute_spatiotemporal_weights, compute_weights

log = logging.getLogger(__name__)

CODERS = ("marginal", "lasso")
SMOOTHING = ("none", "feature", "spatiotemporal", "temporal_only")
HISTORY_HEADER = ("iter", "rel_err", "objective", "incoherence", "code_time_s", "dict_time_s")

STALL_WINDOW = 10
STALL_DELTA = 1e-6


class TrainingError(RuntimeError):
    def __init__(self, msg: str, iteration: int):
        super().__init__(f"{msg} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class TrainConfig:
    K: int
    lam: float
    kappa: float = 0.0
    eta: float = 0.0
    gamma_monitor: float = 0.0
    max_outer_iters: int = 50
    rel_err_tol: float = 0.1
    coder: str = "marginal"
    smoothing: str = "feature"
    kernel: KernelSpec = field(default_factory=KernelSpec)
    seed: int = 0
    lasso_tol: float = 1e-6
    lasso_max_iter: int = 1000
    hard_thresh: Optional[float] = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.kappa < 0 or self.eta < 0 or self.gamma_monitor < 0:
            raise ValueError("kappa, eta and gamma_monitor must be >= 0")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be >= 0")
        if not 0 < self.rel_err_tol < 1:
            raise ValueError(f"rel_err_tol must be in (0, 1), got {self.rel_err_tol}")
        if self.coder not in CODERS:
            raise ValueError(f"coder must be one of {CODERS}, got {self.coder!r}")
        if self.smoothing not in SMOOTHING:
            raise ValueError(f"smoothing must be one of {SMOOTHING}, got {self.smoothing!r}")
        if self.smoothing in ("spatiotemporal", "temporal_only") and self.kernel.temporal is None:
            raise ValueError(f"smoothing={self.smoothing!r} needs a temporal kernel")

    @property
    def penalties(self) -> UpdatePenalties:
        return UpdatePenalties(self.kappa, self.eta)


@dataclass
class IterRecord:
    iter: int
    rel_err: float
    objective: float
    incoherence: float
    code_time_s: float
    dict_time_s: float
    # objective right after coding against the previous dictionary
    objective_coded: float = float("nan")
    # objective after the linear solve, before atom replacement and projection
    objective_unprojected: float = float("nan")
    lasso_converged: Optional[bool] = None


@dataclass
class TrainHistory:
    records: list[IterRecord] = field(default_factory=list)
    status: str = "running"  # converged | max_iter | stalled
    init_code_time_s: float = 0.0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def code_time_s(self) -> float:
        return float(sum(r.code_time_s for r in self.records))

    @property
    def dict_time_s(self) -> float:
        return float(sum(r.dict_time_s for r in self.records))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_HEADER)
            for r in self.records:
                w.writerow([r.iter] + [repr(float(getattr(r, k))) for k in HISTORY_HEADER[1:]])


class TrainResult(NamedTuple):
    dictionary: np.ndarray
    codes: np.ndarray
    history: TrainHistory


def relative_reconstruction_error(X: np.ndarray, D: np.ndarray, B: np.ndarray) -> float:
    """``||X - D B||_F / ||X||_F``."""
    X = np.asarray(X, dtype=np.float64)
    nx = np.linalg.norm(X)
    if nx == 0:
        raise ValueError("relative error undefined for X = 0")
    return float(np.linalg.norm(X - D @ B) / nx)


def smooth_objective(X: np.ndarray, W: Optional[np.ndarray], D: np.ndarray, B: np.ndarray) -> float:
    """``sum_i sum_j W[i, j] ||x_j - D b_i||^2``; ``W=None`` is the identity.

    Expanded through the row sums of ``W`` so the cost is a few matrix
    products rather than n^2 residuals.
    """
    X = np.asarray(X, dtype=np.float64)
    R = D @ B
    if W is None:
        E = X - R
        return float(np.sum(E * E))
    W = np.asarray(W, dtype=np.float64)
    xx = np.einsum("ij,ij->j", X, X)
    rr = np.einsum("ij,ij->j", R, R)
    cross = np.einsum("ij,ij->j", R, X @ W.T)
    return float(W.sum(axis=1) @ rr - 2.0 * cross.sum() + np.sum(W @ xx))


def build_weights(X: np.ndarray, cfg: TrainConfig, timestamps=None) -> Optional[np.ndarray]:
    if cfg.smoothing == "none":
        return None
    if cfg.smoothing == "feature":
        return compute_weights(X, cfg.kernel)
    if timestamps is None:
        timestamps = np.arange(np.shape(X)[1], dtype=float)
    return compute_spatiotemporal_weights(
        X, timestamps, cfg.kernel, temporal_only=cfg.smoothing == "temporal_only"
    )


def _check_inputs(X, W):
    if X.ndim != 2 or X.size == 0:
        raise ValueError("X must be a non-empty d x n matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or Inf")
    if W is not None:
        n = X.shape[1]
        if W.shape != (n, n):
            raise ValueError(f"weight matrix shape {W.shape} does not match n={n}")
        if np.any(W < 0) or np.max(np.abs(W.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("weight matrix must be non-negative and row-stochastic")


class _Coder:
    """Coding step bound to one configuration; lasso warm-starts from the last codes."""

    def __init__(self, X, W, cfg: TrainConfig):
        self.X, self.W, self.cfg = X, W, cfg
        self.last_info = None

    def __call__(self, D, B_prev=None):
        cfg = self.cfg
        if cfg.coder == "marginal":
            return code_all_mr(self.X, D, self.W, cfg.lam, hard_thresh=cfg.hard_thresh)
        B, info = code_all_lasso(
            self.X, D, self.W, cfg.lam, tol=cfg.lasso_tol, max_iter=cfg.lasso_max_iter, init=B_prev
        )
        self.last_info = info
        return B


def train(
    X: np.ndarray,
    W: Optional[np.ndarray],
    cfg: TrainConfig,
    *,
    init: Optional[np.ndarray] = None,
    timestamps=None,
) -> TrainResult:
    """Learn a dictionary and codes by alternating coding and dictionary steps.

    Parameters
    ----------
    X : (d, n) array
        One sample per column.
    W : (n, n) array or None
        Row-stochastic smoothing weights. ``None`` builds them from
        ``cfg.kernel`` according to ``cfg.smoothing``. ``smoothing="none"``
        always uses the identity, whatever ``W`` is.
    cfg : TrainConfig
    init : (d, K) array, optional
        Initial dictionary; defaults to ``init_dictionary(X, K, seed)``.
    timestamps : array, optional
        Per-sample times for the temporal kernels (default ``0..n-1``).

    Returns
    -------
    TrainResult
        ``(dictionary, codes, history)``. With ``max_outer_iters = 0`` the
        initial dictionary and one coding pass against it are returned.
    """
    X = np.asarray(X, dtype=np.float64)
    if cfg.smoothing == "none":
        W = None
    elif W is None:
        W = build_weights(X, cfg, timestamps)
    else:
        W = np.asarray(W, dtype=np.float64)
    _check_inputs(X, W)

    D = init_dictionary(X, cfg.K, cfg.seed) if init is None else np.array(init, dtype=np.float64)
    if D.shape != (X.shape[0], cfg.K):
        raise ValueError(f"initial dictionary shape {D.shape} != ({X.shape[0]}, {cfg.K})")
    coder = _Coder(X, W, cfg)
    history = TrainHistory()

    t0 = time.perf_counter()
    B = coder(D)
    history.init_code_time_s = time.perf_counter() - t0
    if cfg.max_outer_iters == 0:
        history.status = "max_iter"
        return TrainResult(D, B, history)

    pens = cfg.penalties
    # state objective of the current (D, B); for t=1 the codes come from D_0
    for it in range(1, cfg.max_outer_iters + 1):
        code_time = 0.0
        if it > 1:
            t0 = time.perf_counter()
            B = coder(D, B)
            code_time = time.perf_counter() - t0
        else:
            code_time = history.init_code_time_s
        obj_coded = smooth_objective(X, W, D, B)

        t0 = time.perf_counter()
        D, info = dictionary_update(X, B, D, pens, return_info=True)
        dict_time = time.perf_counter() - t0

        rec = IterRecord(
            iter=it,
            rel_err=relative_reconstruction_error(X, D, B),
            objective=smooth_objective(X, W, D, B),
            incoherence=incoherence(D),
            code_time_s=code_time,
            dict_time_s=dict_time,
            objective_coded=obj_coded,
            objective_unprojected=smooth_objective(X, W, info.unprojected, B),
            lasso_converged=None if coder.last_info is None else coder.last_info.all_converged,
        )
        if not (np.isfinite(rec.objective) and np.isfinite(rec.rel_err)):
            raise TrainingError("non-finite objective", it)
        history.records.append(rec)
        log.debug(
            "iter %d rel_err=%.5f obj=%.6g incoh=%.4g code=%.3fs dict=%.3fs",
            it, rec.rel_err, rec.objective, rec.incoherence, code_time, dict_time,
        )
        if cfg.gamma_monitor and rec.incoherence > cfg.gamma_monitor:
            log.debug("incoherence %.4g above gamma_monitor %.4g", rec.incoherence, cfg.gamma_monitor)

        if rec.rel_err <= cfg.rel_err_tol:
            history.status = "converged"
            break
        if it > STALL_WINDOW:
            past = history.records[-1 - STALL_WINDOW].rel_err
            if past - rec.rel_err < STALL_DELTA:
                history.status = "stalled"
                break
    else:
        history.status = "max_iter"
    return TrainResult(D, B, history)


def config_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(TrainConfig))
