"""Sparse codes for a fixed dictionary.

Two coders share the same smoothed-sample formulation. For row ``w_i`` of
the weight matrix the kernel-weighted loss

    sum_j W[i, j] * ||x_j - D b||^2 = ||s_i - D b||^2 + c_i,   s_i = X w_i,

so both coders only ever see the smoothed samples ``S = X W^T``:

* marginal regression: ``alpha = normalize_cols(D)^T s_i`` followed by the
  top-s L1-budget rule (optionally preceded by a hard threshold);
* lasso: accelerated projected gradient on the L1 ball of radius ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel


class ZeroAtomError(ValueError):
    def __init__(self, index: int):
        super().__init__(f"dictionary column {index} has zero norm")
        self.index = index


@dataclass
class LassoInfo:
    n_iter: int
    converged: np.ndarray  # bool per sample

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def smooth_samples(X: np.ndarray, W: Optional[np.ndarray]) -> np.ndarray:
    """Column ``i`` is ``sum_j W[i, j] x_j``; ``W=None`` means identity."""
    X = np.asarray(X, dtype=np.float64)
    if W is None:
        return X
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (X.shape[1], X.shape[1]):
        raise ValueError(f"weight matrix shape {W.shape} does not match n={X.shape[1]}")
    return X @ W.T


def atom_norms(D: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(D, axis=0)
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise ZeroAtomError(int(bad[0]))
    return norms


def marginal_coefficients(i: int, X: np.ndarray, D: np.ndarray, W: Optional[np.ndarray] = None) -> np.ndarray:
    """Marginal least-squares coefficients of sample ``i`` against every atom."""
    X = np.asarray(X, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    s = X[:, i] if W is None else X @ np.asarray(W, dtype=np.float64)[i]
    return (D / atom_norms(D)).T @ s


def threshold_top_s(alphas: np.ndarray, lam: float) -> np.ndarray:
    """Keep the largest-magnitude coefficients while their L1 sum stays <= lam.

    Indices are visited by decreasing ``|alpha|`` (ties: lower index first) and
    admitted until the running sum would exceed ``lam``. Admitted entries keep
    their value, everything else is zeroed.

    >>> threshold_top_s(np.array([3.0, 1.0]), 3.0)
    array([3., 0.])
    """
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    a = np.asarray(alphas, dtype=np.float64)
    return _accel.budget_threshold(a.reshape(-1, 1), lam).ravel()


def hard_threshold(alphas: np.ndarray, t: float) -> np.ndarray:
    a = np.asarray(alphas, dtype=np.float64)
    return np.where(np.abs(a) > t, a, 0.0)


def code_all_mr(
    X: np.ndarray,
    D: np.ndarray,
    W: Optional[np.ndarray],
    lam: float,
    *,
    hard_thresh: Optional[float] = None,
) -> np.ndarray:
    """K x n code matrix by smoothed marginal regression.

    Computes ``normalize_cols(D)^T (X W^T)`` in one product and thresholds each
    column with the L1-budget rule. ``hard_thresh`` first zeroes every
    coefficient with ``|alpha| <= hard_thresh``; the budget still applies.
    """
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    D = np.asarray(D, dtype=np.float64)
    A = (D / atom_norms(D)).T @ smooth_samples(X, W)
    if hard_thresh is not None:
        A = hard_threshold(A, hard_thresh)
    return _accel.budget_threshold(A, lam)


def project_l1_ball(v: np.ndarray, lam: float) -> np.ndarray:
    """Euclidean projection onto ``{u : ||u||_1 <= lam}`` (sort and shrink)."""
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    return _accel.project_l1(v.reshape(-1, 1), lam).ravel()


def spectral_norm_sq(D: np.ndarray, n_iter: int = 100, rtol: float = 1e-10, seed: int = 0) -> float:
    """Largest eigenvalue of ``D^T D`` by power iteration on the smaller Gram."""
    D = np.asarray(D, dtype=np.float64)
    G = D @ D.T if D.shape[0] <= D.shape[1] else D.T @ D
    v = np.random.default_rng(seed).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(n_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est


def code_all_lasso(
    X: np.ndarray,
    D: np.ndarray,
    W: Optional[np.ndarray],
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 1000,
    *,
    init: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, LassoInfo]:
    """Kernel-weighted lasso codes under ``||b||_1 <= lam``.

    Accelerated projected gradient (FISTA with function-value restart), step
    ``1/L`` with ``L = 2 sigma_max(D)^2``. A column stops once the relative
    change of ``||s_i - D b||^2`` drops below ``tol``; the weighted loss
    differs from it by a code-independent constant, which is left out so it
    cannot mask slow progress. Converged columns leave the active set.

    Returns the best iterate per column and a :class:`LassoInfo` with
    per-column convergence flags.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    X = np.asarray(X, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    S = smooth_samples(X, W)
    K, n = D.shape[1], X.shape[1]
    L = 2.0 * spectral_norm_sq(D) * 1.01
    if L == 0.0:
        return np.zeros((K, n)), LassoInfo(0, np.ones(n, dtype=bool))

    B = np.zeros((K, n)) if init is None else _accel.project_l1(np.array(init, dtype=np.float64), lam)
    R = D @ B - S
    f = np.einsum("ij,ij->j", R, R)
    best_B, best_f = B.copy(), f.copy()
    Y = B.copy()
    t = np.ones(n)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    it = 0
    while it < max_iter and active.size:
        it += 1
        Ya, Ba, Sa = Y[:, active], B[:, active], S[:, active]
        grad = 2.0 * (D.T @ (D @ Ya - Sa))
        Bn = _accel.project_l1(Ya - grad / L, lam)
        Rn = D @ Bn - Sa
        fn = np.einsum("ij,ij->j", Rn, Rn)
        fa = f[active]

        improved = fn < best_f[active]
        if improved.any():
            cols = active[improved]
            best_B[:, cols] = Bn[:, improved]
            best_f[cols] = fn[improved]

        ta = t[active]
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
        Yn = Bn + ((ta - 1.0) / tn) * (Bn - Ba)
        restart = fn > fa
        if restart.any():
            Yn[:, restart] = Bn[:, restart]
            tn[restart] = 1.0

        done = np.abs(fa - fn) <= tol * np.maximum(np.abs(fa), np.finfo(float).tiny)
        B[:, active] = Bn
        Y[:, active] = Yn
        f[active] = fn
        t[active] = tn
        converged[active[done]] = True
        active = active[~done]

    return best_B, LassoInfo(it, converged)


def code_all(X, D, W, lam, coder: str = "marginal", **kw):
    """Dispatch to :func:`code_all_mr` or :func:`code_all_lasso` (codes only)."""
    if coder == "marginal":
        return code_all_mr(X, D, W, lam, hard_thresh=kw.get("hard_thresh"))
    if coder == "lasso":
        B, _ = code_all_lasso(
            X, D, W, lam, tol=kw.get("tol", 1e-6), max_iter=kw.get("max_iter", 1000), init=kw.get("init")
        )
        return B
    raise ValueError(f"unknown coder {coder!r}")
