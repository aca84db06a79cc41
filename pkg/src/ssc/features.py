"""Pooled representations, Fisher scores and a small linear classifier.

Items (images, videos, synthetic groups) own a set of code columns. Their
representation is the coordinate-wise signed max over those columns. Fisher
scores are oriented between/within per dimension, so larger means more
discriminative.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve


@dataclass(frozen=True)
class PooledFeature:
    vector: np.ndarray
    group: tuple[int, ...]


@dataclass
class LabeledSet:
    """``features`` is m x K (one item per row), ``labels`` has length m."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels).ravel()
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)


def max_pool(B: np.ndarray, groups: Sequence[Sequence[int]]) -> list[PooledFeature]:
    """Coordinate-wise max of the code columns in each group.

    Raises ``ValueError`` for an empty group, an out-of-range column or a
    column shared by two groups.
    """
    B = np.asarray(B, dtype=np.float64)
    n = B.shape[1]
    seen: set[int] = set()
    out = []
    for g, cols in enumerate(groups):
        cols = tuple(int(c) for c in cols)
        if not cols:
            raise ValueError(f"group {g} is empty")
        for c in cols:
            if not 0 <= c < n:
                raise ValueError(f"group {g} references column {c}, code matrix has {n}")
            if c in seen:
                raise ValueError(f"column {c} appears in more than one group")
            seen.add(c)
        out.append(PooledFeature(B[:, list(cols)].max(axis=1), cols))
    return out


def pooled_matrix(pooled: Sequence[PooledFeature]) -> np.ndarray:
    return np.vstack([p.vector for p in pooled])


def contiguous_groups(n: int, size: int) -> list[list[int]]:
    """Consecutive blocks of ``size`` columns; a trailing remainder is its own group."""
    if size < 1:
        raise ValueError(f"group size must be >= 1, got {size}")
    return [list(range(s, min(s + size, n))) for s in range(0, n, size)]


def fisher_scores(data: LabeledSet) -> np.ndarray:
    """Per-dimension between-class over within-class variance.

    Both variances are weighted by class frequency ``m_c / m``; class
    variances use the population (ddof=0) convention. A dimension with zero
    within-class variance scores ``+inf``.
    """
    F, y = data.features, data.labels
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValueError("Fisher scores need at least 2 classes")
    if counts.min() < 2:
        raise ValueError(f"class {classes[np.argmin(counts)]!r} has fewer than 2 items")
    m = F.shape[0]
    mu = F.mean(axis=0)
    between = np.zeros(F.shape[1])
    within = np.zeros(F.shape[1])
    for c, mc in zip(classes, counts):
        Fc = F[y == c]
        muc = Fc.mean(axis=0)
        between += (mc / m) * (muc - mu) ** 2
        within += (mc / m) * Fc.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = between / within
    scores[within == 0] = np.inf
    return scores


class FisherRatio(NamedTuple):
    ratio: np.ndarray  # NaN where skipped
    skipped: int


def fisher_ratio(scores_a: np.ndarray, scores_b: np.ndarray) -> FisherRatio:
    """Element-wise ``scores_a / scores_b``.

    Dimensions with a non-positive denominator, or a non-finite score on
    either side, are skipped (left NaN) and counted.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"score vectors differ in length: {a.shape} vs {b.shape}")
    ok = np.isfinite(a) & np.isfinite(b) & (b > 0)
    ratio = np.full(a.shape, np.nan)
    ratio[ok] = a[ok] / b[ok]
    return FisherRatio(ratio, int(np.count_nonzero(~ok)))


def ratio_histogram(ratio: np.ndarray, bins: int = 20, path=None) -> np.ndarray:
    """Histogram rows ``(bin_left, bin_right, count)`` over the finite ratios.

    Written as CSV with a header when ``path`` is given.
    """
    r = np.asarray(ratio, dtype=np.float64)
    r = r[np.isfinite(r)]
    if r.size == 0:
        rows = np.empty((0, 3))
    else:
        counts, edges = np.histogram(r, bins=bins)
        rows = np.column_stack([edges[:-1], edges[1:], counts])
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count"])
            for left, right, c in rows:
                w.writerow([format(left, ".17g"), format(right, ".17g"), int(c)])
    return rows


class IllConditionedWarning(UserWarning):
    pass


@dataclass
class ClassifierModel:
    weights: np.ndarray  # K x C
    bias: np.ndarray  # C
    classes: np.ndarray
    reg: float
    ridged: bool = False  # regularization had to be raised

    def scores(self, features: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(features, dtype=np.float64)) @ self.weights + self.bias


def train_linear_classifier(train: LabeledSet, reg: float = 1.0) -> ClassifierModel:
    """One-vs-all ridge regression onto +-1 class indicators.

    Features are centered so the bias is left unpenalized. If the normal
    equations do not factor, the ridge is raised tenfold until they do and
    the model is flagged.
    """
    if not reg > 0:
        raise ValueError(f"reg must be > 0, got {reg}")
    F, y = train.features, train.labels
    classes = train.classes
    Y = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
    mu_f = F.mean(axis=0)
    mu_y = Y.mean(axis=0)
    Fc = F - mu_f
    G = Fc.T @ Fc
    rhs = Fc.T @ (Y - mu_y)
    r, ridged = float(reg), False
    eye = np.eye(G.shape[0])
    while True:
        try:
            Wt = cho_solve(cho_factor(G + r * eye), rhs)
            if np.all(np.isfinite(Wt)):
                break
        except LinAlgError:
            pass
        r *= 10.0
        ridged = True
        if r > 1e12 * max(1.0, float(np.trace(G))):
            raise LinAlgError("normal equations stay singular after raising the ridge")
    if ridged:
        warnings.warn(f"classifier ridge raised from {reg} to {r}", IllConditionedWarning, stacklevel=2)
    return ClassifierModel(Wt, mu_y - mu_f @ Wt, classes, r, ridged)


def classify(model: ClassifierModel, features: np.ndarray) -> np.ndarray:
    return model.classes[np.argmax(model.scores(features), axis=1)]


def accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(truth)))


def nearest_centroid(train: LabeledSet, features: np.ndarray) -> np.ndarray:
    """Baseline used to sanity-check the classifier."""
    classes = train.classes
    C = np.vstack([train.features[train.labels == c].mean(axis=0) for c in classes])
    F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    d2 = ((F[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    return classes[np.argmin(d2, axis=1)]


def split_indices(m: int, test_fraction: float, seed: Optional[int] = 0, labels=None):
    """Seeded train/test split of ``range(m)``, stratified when labels are given."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    if labels is None:
        perm = rng.permutation(m)
        n_test = max(1, int(round(test_fraction * m)))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    labels = np.asarray(labels)
    tr, te = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = max(1, int(round(test_fraction * idx.size)))
        te.append(idx[:n_test])
        tr.append(idx[n_test:])
    return np.sort(np.concatenate(tr)), np.sort(np.concatenate(te))
