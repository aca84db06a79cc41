"""Synthetic benchmarks: coding speed, scaling in K, downstream accuracy.

All benches run on a two-class Gaussian mixture with unit covariance and
means ``+-(separation / 2) e_1``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _accel
from .coding import code_all_lasso, code_all_mr
from .dictionary import init_dictionary
from .features import (
    LabeledSet,
    accuracy,
    classify,
    fisher_ratio,
    fisher_scores,
    max_pool,
    pooled_matrix,
    split_indices,
    train_linear_classifier,
)
from .kernels import KernelSpec, compute_weights, pairwise_distances
from .trainer import TrainConfig, relative_reconstruction_error, train

log = logging.getLogger(__name__)

METHODS = ("SC+LASSO", "SC+MR", "SSC+LASSO", "SSC+MR")


@dataclass(frozen=True)
class MixtureSpec:
    dim: int = 100
    separation: float = 3.0
    n_per_class: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.n_per_class < 1:
            raise ValueError("dim and n_per_class must be >= 1")
        if self.separation < 0:
            raise ValueError(f"separation must be >= 0, got {self.separation}")

    @property
    def n(self) -> int:
        return 2 * self.n_per_class


def gen_mixture(spec: MixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(X, labels)`` with X of shape (dim, 2 n_per_class), class 0 first."""
    rng = np.random.default_rng(spec.seed)
    mu = np.zeros(spec.dim)
    mu[0] = spec.separation / 2.0
    X = rng.standard_normal((spec.dim, spec.n))
    X[:, : spec.n_per_class] += mu[:, None]
    X[:, spec.n_per_class :] -= mu[:, None]
    labels = np.repeat([0, 1], spec.n_per_class)
    return X, labels


def quantile_bandwidth_from(dist: np.ndarray, q: float) -> float:
    """Quantile ``q`` of the off-diagonal pairwise distances."""
    iu = np.triu_indices(dist.shape[0], k=1)
    return float(np.quantile(dist[iu], q))


def ssc_weights(X: np.ndarray, family: str = "tricube", q: float = 0.01) -> tuple[np.ndarray, float]:
    dist = pairwise_distances(X)
    h = quantile_bandwidth_from(dist, q)
    return compute_weights(X, KernelSpec(family, h), distances=dist), h


# --------------------------------------------------------------------------
# speed
# --------------------------------------------------------------------------


@dataclass
class MethodStats:
    method: str
    times: list
    total_times: list
    rel_errs: list
    iterations: list
    dnf: bool = False

    @property
    def mean_time(self) -> float:
        return float(np.mean(self.times)) if self.times else float("nan")

    @property
    def std_time(self) -> float:
        return float(np.std(self.times)) if self.times else float("nan")

    def row(self) -> dict:
        return {
            "method": self.method,
            "mean_time_s": self.mean_time,
            "std_time_s": self.std_time,
            "mean_total_time_s": float(np.mean(self.total_times)) if self.total_times else float("nan"),
            "rel_err": float(np.max(self.rel_errs)) if self.rel_errs else float("nan"),
            "iterations": float(np.mean(self.iterations)) if self.iterations else float("nan"),
            "dnf": int(self.dnf),
        }


@dataclass
class BenchReport:
    methods: dict
    K: int
    target_rel_err: float
    repeats: int
    bandwidth: float

    @property
    def any_dnf(self) -> bool:
        return any(m.dnf for m in self.methods.values())

    def rows(self) -> list[dict]:
        return [self.methods[m].row() for m in METHODS if m in self.methods]

    def speedup(self, smoothed: bool) -> float:
        p = "SSC" if smoothed else "SC"
        return self.methods[f"{p}+LASSO"].mean_time / self.methods[f"{p}+MR"].mean_time


def run_speed_bench(
    spec: MixtureSpec,
    K: int = 1024,
    target_rel_err: float = 0.10,
    repeats: int = 3,
    *,
    base: Optional[TrainConfig] = None,
    bandwidth_quantile: float = 0.01,
    methods: Sequence[str] = METHODS,
) -> BenchReport:
    """Time the coding steps of the four coder/smoothing combinations.

    Every method sees the same data, the same weight matrix and, within a
    repeat, the same initial dictionary. Only coding time counts; weight
    construction and dictionary updates are kept out (total time is logged).
    A method that misses ``target_rel_err`` in any repeat is flagged DNF.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    base = base or TrainConfig(K=K, lam=600.0, lasso_tol=1e-3, lasso_max_iter=300)
    base = replace(base, K=K, rel_err_tol=target_rel_err)
    X, _ = gen_mixture(spec)
    needs_w = any(m.startswith("SSC") for m in methods)
    W, h = ssc_weights(X, base.kernel.family, bandwidth_quantile) if needs_w else (None, float("nan"))
    stats = {m: MethodStats(m, [], [], [], []) for m in methods}
    for r in range(repeats):
        D0 = init_dictionary(X, K, base.seed + r)
        for m in methods:
            smooth, coder = m.split("+")
            cfg = replace(
                base,
                coder="lasso" if coder == "LASSO" else "marginal",
                smoothing="feature" if smooth == "SSC" else "none",
            )
            t0 = time.perf_counter()
            res = train(X, W if smooth == "SSC" else None, cfg, init=D0)
            total = time.perf_counter() - t0
            hist = res.history
            st = stats[m]
            st.times.append(hist.code_time_s)
            st.total_times.append(total)
            st.rel_errs.append(float(hist.records[-1].rel_err) if hist.records else float("nan"))
            st.iterations.append(len(hist))
            if hist.status != "converged":
                st.dnf = True
            log.info("repeat %d %s: code %.3fs total %.3fs status %s", r, m, hist.code_time_s, total, hist.status)
    return BenchReport(stats, K, target_rel_err, repeats, h)


# --------------------------------------------------------------------------
# scaling in K
# --------------------------------------------------------------------------


def fit_exponent(x: Sequence[float], y: Sequence[float]) -> float:
    """Slope of the least-squares line through ``(log x, log y)``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def run_scaling_bench(
    spec: MixtureSpec,
    K_values: Iterable[int] = (128, 256, 512, 1024),
    *,
    lam: float = 5.0,
    lasso_tol: float = 1e-8,
    lasso_max_iter: int = 20000,
    mr_repeats: int = 10,
    lasso_repeats: int = 3,
    seed: int = 1,
) -> dict:
    """Per-sample coding time of both coders against a fixed dictionary.

    Each time is the best of ``mr_repeats`` (MR) or ``lasso_repeats`` (lasso)
    runs, so scheduler noise does not tilt the fitted slopes. Returns per-K
    rows plus fitted log-log exponents.
    """
    X, _ = gen_mixture(spec)
    n = X.shape[1]
    # compile and warm caches outside the timed region
    code_all_mr(X[:, :8], X[:, :4], None, lam)
    code_all_lasso(X[:, :8], X[:, :4], None, lam, max_iter=5)
    rows = []
    for K in K_values:
        D = init_dictionary(X, int(K), seed)
        t_lasso = np.inf
        for _ in range(lasso_repeats):
            t0 = time.perf_counter()
            B, info = code_all_lasso(X, D, None, lam, tol=lasso_tol, max_iter=lasso_max_iter)
            t_lasso = min(t_lasso, time.perf_counter() - t0)
        t_mr = np.inf
        for _ in range(mr_repeats):
            t0 = time.perf_counter()
            code_all_mr(X, D, None, lam)
            t_mr = min(t_mr, time.perf_counter() - t0)
        rows.append(
            {
                "K": int(K),
                "mr_time_per_sample_s": t_mr / n,
                "lasso_time_per_sample_s": t_lasso / n,
                "lasso_iters": info.n_iter,
                "lasso_converged_frac": float(info.converged.mean()),
            }
        )
        log.info("K=%d mr %.4fs lasso %.3fs (%d iters)", K, t_mr, t_lasso, info.n_iter)
    Ks = [r["K"] for r in rows]
    return {
        "rows": rows,
        "mr_exponent": fit_exponent(Ks, [r["mr_time_per_sample_s"] for r in rows]),
        "lasso_exponent": fit_exponent(Ks, [r["lasso_time_per_sample_s"] for r in rows]),
    }


# --------------------------------------------------------------------------
# downstream accuracy and Fisher ratios
# --------------------------------------------------------------------------


def item_groups(labels: np.ndarray, group_size: int, seed: int = 0) -> tuple[list[list[int]], np.ndarray]:
    """Random same-class groups of ``group_size`` samples; returns groups and item labels."""
    rng = np.random.default_rng(seed)
    groups, item_labels = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for s in range(0, idx.size - group_size + 1, group_size):
            groups.append(sorted(idx[s : s + group_size].tolist()))
            item_labels.append(c)
    return groups, np.asarray(item_labels)


@dataclass
class PipelineResult:
    accuracy_sc: float
    accuracy_ssc: float
    scores_sc: np.ndarray
    scores_ssc: np.ndarray
    bandwidth: float

    @property
    def ratio(self):
        return fisher_ratio(self.scores_ssc, self.scores_sc)


def evaluate_pipelines(
    X: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    *,
    group_size: int = 5,
    test_fraction: float = 0.5,
    reg: float = 1.0,
    bandwidth_quantile: float = 0.1,
    seed: int = 0,
) -> PipelineResult:
    """Train SC and SSC on the same data and evaluate both representations.

    Dictionaries and weights are learned without labels on all samples.
    Samples are grouped into same-class items and max-pooled; one seeded,
    stratified split of the items is shared by both pipelines. Fisher scores
    use the training items.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if labels.size != X.shape[1]:
        raise ValueError(f"{labels.size} labels for {X.shape[1]} samples")
    W, h = ssc_weights(X, cfg.kernel.family, bandwidth_quantile)
    D0 = init_dictionary(X, cfg.K, cfg.seed)
    groups, y = item_groups(labels, group_size, seed)
    tr, te = split_indices(len(groups), test_fraction, seed, labels=y)
    out = {}
    for name, smoothing, weights in (("sc", "none", None), ("ssc", "feature", W)):
        c = replace(cfg, smoothing=smoothing)
        res = train(X, weights, c, init=D0)
        F = pooled_matrix(max_pool(res.codes, groups))
        train_set = LabeledSet(F[tr], y[tr])
        model = train_linear_classifier(train_set, reg)
        out[name] = (accuracy(classify(model, F[te]), y[te]), fisher_scores(train_set))
    return PipelineResult(out["sc"][0], out["ssc"][0], out["sc"][1], out["ssc"][1], h)


def run_pipelines(spec: MixtureSpec, cfg: TrainConfig, **kw) -> PipelineResult:
    X, labels = gen_mixture(spec)
    kw.setdefault("seed", spec.seed)
    return evaluate_pipelines(X, labels, cfg, **kw)


def run_accuracy_bench(spec: MixtureSpec, cfg: TrainConfig, **kw) -> tuple[float, float]:
    r = run_pipelines(spec, cfg, **kw)
    return r.accuracy_sc, r.accuracy_ssc


def run_fisher_bench(spec: MixtureSpec, cfg: TrainConfig, **kw):
    """``(FisherRatio, PipelineResult)``; pass the ratio to ``ratio_histogram`` for CSV."""
    r = run_pipelines(spec, cfg, **kw)
    return r.ratio, r


# --------------------------------------------------------------------------
# hyper-parameter grid
# --------------------------------------------------------------------------


def grid_search(
    X: np.ndarray,
    cfg: TrainConfig,
    lams: Sequence[float],
    bandwidths: Sequence[float],
    *,
    timestamps=None,
) -> list[dict]:
    """Train once per ``(lambda, h1)`` pair and report the outcome.

    With ``smoothing="none"`` the bandwidth axis does not matter and only
    the lambda values are swept.
    """
    X = np.asarray(X, dtype=np.float64)
    dist = None if cfg.smoothing != "feature" else pairwise_distances(X)
    widths = [float("nan")] if cfg.smoothing == "none" else list(bandwidths)
    D0 = init_dictionary(X, cfg.K, cfg.seed)
    rows = []
    for lam in lams:
        for h in widths:
            kernel = cfg.kernel if cfg.smoothing == "none" else replace(cfg.kernel, h1=float(h))
            c = replace(cfg, lam=float(lam), kernel=kernel)
            W = compute_weights(X, kernel, distances=dist) if dist is not None else None
            t0 = time.perf_counter()
            res = train(X, W, c, init=D0, timestamps=timestamps)
            last = res.history.records[-1] if res.history.records else None
            rows.append(
                {
                    "lambda": float(lam),
                    "h1": float(h),
                    "rel_err": relative_reconstruction_error(X, res.dictionary, res.codes),
                    "objective": last.objective if last else float("nan"),
                    "iterations": len(res.history),
                    "status": res.history.status,
                    "code_time_s": res.history.code_time_s,
                    "total_time_s": time.perf_counter() - t0,
                    "mean_nnz": float(np.count_nonzero(res.codes) / res.codes.shape[1]),
                }
            )
    return rows


# --------------------------------------------------------------------------
# numba vs numpy
# --------------------------------------------------------------------------


def run_backend_bench(K: int = 1024, n: int = 2000, d: int = 100, lam: float = 5.0, repeats: int = 3, seed: int = 0):
    """Best-of-``repeats`` time of each hot kernel under both backends."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((K, n))
    X = rng.standard_normal((d, n))
    U = rng.uniform(-1.5, 1.5, (n, n))
    cases = {
        "budget_threshold": (_accel.budget_threshold_numpy, "_budget_threshold_nb", (A, lam)),
        "project_l1": (_accel.project_l1_numpy, "_project_l1_nb", (A, lam)),
        "kernel_values": (_accel.kernel_values_numpy, "_kernel_values_nb", (U, _accel.KERNEL_IDS["tricube"])),
        "pairwise_euclidean": (_accel.pairwise_euclidean_numpy, "_pairwise_euclidean_nb", (X,)),
    }
    rows = []
    for name, (np_fn, nb_name, args) in cases.items():
        impls = [("numpy", np_fn)]
        if _accel.HAS_NUMBA:
            impls.append(("numba", getattr(_accel, nb_name)))
        for backend, fn in impls:
            fn(*args)  # warm-up / compile
            best = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn(*args)
                best = min(best, time.perf_counter() - t0)
            rows.append({"kernel": name, "backend": backend, "time_s": best})
    return rows
