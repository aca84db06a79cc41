"""Smoothing kernels and row-stochastic weight matrices.

Kernels are used un-normalized; normalizing constants and the ``1/h`` factor
cancel once each row of the weight matrix is scaled to sum to one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from . import _accel

KERNEL_FAMILIES = tuple(_accel.KERNEL_IDS)
COMPACT_FAMILIES = ("tricube", "triangular", "uniform")

DistanceFn = Union[str, Callable[[np.ndarray, np.ndarray], float]]


class DegenerateWeightsWarning(UserWarning):
    """Some rows had no positive kernel weight and fell back to self-weight 1."""


@dataclass(frozen=True)
class TemporalKernel:
    family: str = "tricube"
    bandwidth: float = 1.0

    def __post_init__(self):
        _check_family(self.family)
        if not self.bandwidth > 0:
            raise ValueError(f"temporal bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class KernelSpec:
    """Feature kernel ``K_1`` with bandwidth ``h1``, optionally times a temporal kernel."""

    family: str = "tricube"
    h1: float = 1.0
    temporal: Optional[TemporalKernel] = None

    def __post_init__(self):
        _check_family(self.family)
        if not self.h1 > 0:
            raise ValueError(f"feature bandwidth h1 must be > 0, got {self.h1}")


def _check_family(family: str) -> None:
    if family not in _accel.KERNEL_IDS:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {KERNEL_FAMILIES}")


def eval_kernel(family: str, u):
    """Evaluate the un-normalized kernel ``K(u)``.

    Forms: uniform ``1{|u|<=1}``, triangular ``(1-|u|)``, tricube
    ``(1-|u|^3)^3`` (all zero outside ``|u|<=1``) and gaussian ``exp(-u^2/2)``.
    Scalars give a float, arrays give an array of the same shape.
    """
    _check_family(family)
    kid = _accel.KERNEL_IDS[family]
    if np.ndim(u) == 0:
        return float(_accel.kernel_values_numpy(np.float64(u), kid))
    return _accel.kernel_values(np.asarray(u, dtype=np.float64), kid)


def pairwise_distances(X: np.ndarray, distance: DistanceFn = "euclidean") -> np.ndarray:
    """n x n matrix of ``rho(x_i, x_j)`` for the columns of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if isinstance(distance, str) and distance == "euclidean":
        return _accel.pairwise_euclidean(X)
    return cdist(X.T, X.T, metric=distance)


def normalize_rows(raw: np.ndarray, *, return_fallbacks: bool = False):
    """Scale rows to sum 1; all-zero rows become the identity row."""
    W = np.array(raw, dtype=np.float64)
    sums = W.sum(axis=1)
    dead = ~(sums > 0)
    if dead.any():
        idx = np.flatnonzero(dead)
        W[idx, :] = 0.0
        W[idx, idx] = 1.0
        sums[idx] = 1.0
        warnings.warn(
            f"{idx.size} weight row(s) had no positive kernel mass; using self-weight 1",
            DegenerateWeightsWarning,
            stacklevel=3,
        )
    W /= sums[:, None]
    if return_fallbacks:
        return W, int(dead.sum())
    return W


def compute_weights(
    X: np.ndarray,
    spec: KernelSpec,
    distance: DistanceFn = "euclidean",
    *,
    distances: Optional[np.ndarray] = None,
    return_fallbacks: bool = False,
):
    """Row-stochastic feature-similarity weights.

    Entry ``(i, j)`` is proportional to ``K_1(rho(x_j, x_i) / h1)``, self
    included, and every row sums to one. Pass ``distances`` to reuse a
    precomputed distance matrix.

    Returns the n x n weight matrix, plus the number of fallback rows when
    ``return_fallbacks`` is true.
    """
    rho = pairwise_distances(X, distance) if distances is None else np.asarray(distances)
    raw = eval_kernel(spec.family, rho / spec.h1)
    return normalize_rows(raw, return_fallbacks=return_fallbacks)


def compute_spatiotemporal_weights(
    X: Optional[np.ndarray],
    timestamps,
    spec: KernelSpec,
    distance: DistanceFn = "euclidean",
    *,
    temporal_only: bool = False,
    distances: Optional[np.ndarray] = None,
    return_fallbacks: bool = False,
):
    """Product kernel ``K_1(rho/h1) * K_2((t_j - t_i)/h2)``, rows normalized.

    With ``temporal_only`` the feature factor is dropped and ``X`` may be
    ``None``. Timestamps are arbitrary reals (frame indices work).
    """
    if spec.temporal is None:
        raise ValueError("spatio-temporal weights need spec.temporal")
    t = np.asarray(timestamps, dtype=np.float64).ravel()
    if X is not None and not temporal_only and np.shape(X)[1] != t.size:
        raise ValueError(f"{t.size} timestamps for {np.shape(X)[1]} samples")
    raw = eval_kernel(spec.temporal.family, (t[None, :] - t[:, None]) / spec.temporal.bandwidth)
    if not temporal_only:
        rho = pairwise_distances(X, distance) if distances is None else np.asarray(distances)
        raw = raw * eval_kernel(spec.family, rho / spec.h1)
    return normalize_rows(raw, return_fallbacks=return_fallbacks)


def kernel_l1_norm_estimate(
    spec: KernelSpec,
    X: np.ndarray,
    reference: Optional[np.ndarray] = None,
    distance: DistanceFn = "euclidean",
) -> float:
    """Monte-Carlo estimate of ``|K_h1|_1``, the L1 norm of the scaled kernel.

    Averages ``(1/h1) K_1(rho(x_i, r)/h1)`` over every sample ``x_i`` and
    every reference point ``r`` (the samples themselves by default). This is
    an empirical plug-in, not an exact integral.
    """
    X = np.asarray(X, dtype=np.float64)
    if reference is None:
        rho = pairwise_distances(X, distance)
    else:
        R = np.asarray(reference, dtype=np.float64)
        rho = cdist(X.T, R.T, metric=distance)
    vals = eval_kernel(spec.family, rho / spec.h1) / spec.h1
    return float(np.mean(vals))


def median_pairwise_distance(X: np.ndarray, distance: DistanceFn = "euclidean") -> float:
    rho = pairwise_distances(X, distance)
    iu = np.triu_indices(rho.shape[0], k=1)
    return float(np.median(rho[iu])) if iu[0].size else 0.0


def quantile_bandwidth(X: np.ndarray, q: float, distance: DistanceFn = "euclidean") -> float:
    """Bandwidth at quantile ``q`` of the off-diagonal pairwise distances."""
    rho = pairwise_distances(X, distance)
    iu = np.triu_indices(rho.shape[0], k=1)
    return float(np.quantile(rho[iu], q)) if iu[0].size else 0.0
