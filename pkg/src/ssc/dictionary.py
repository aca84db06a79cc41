"""Dictionary initialization, penalized MOD update and coherence measures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

RIDGE = 1e-10
# normalized columns can land an ulp or two above 1; leave those alone so
# projection is idempotent
NORM_SLACK = 8 * np.finfo(np.float64).eps


class SingularUpdateWarning(UserWarning):
    """The dictionary system matrix was singular and a ridge was added."""


@dataclass(frozen=True)
class UpdatePenalties:
    kappa: float = 0.0  # incoherence
    eta: float = 0.0  # normalization

    def __post_init__(self):
        if self.kappa < 0 or self.eta < 0:
            raise ValueError(f"penalties must be >= 0, got kappa={self.kappa}, eta={self.eta}")


@dataclass
class UpdateInfo:
    ridged: bool = False
    replaced: np.ndarray = None  # indices of atoms re-seeded from data
    unprojected: np.ndarray = None  # linear-solve output before re-seeding and projection


def init_dictionary(X: np.ndarray, K: int, seed: int = 0) -> np.ndarray:
    """K unit-norm atoms sampled from the data columns.

    Columns are drawn without replacement (with replacement when ``K > n``);
    zero columns are never chosen.
    """
    X = np.asarray(X, dtype=np.float64)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("X must be a non-empty d x n matrix")
    norms = np.linalg.norm(X, axis=0)
    usable = np.flatnonzero(norms > 0)
    if usable.size == 0:
        raise ValueError("all data columns are zero; cannot initialize a dictionary")
    rng = np.random.default_rng(seed)
    # zero columns are excluded up front, equivalent to resampling them
    idx = rng.choice(usable, size=K, replace=K > usable.size)
    return X[:, idx] / norms[idx]


def project_columns(D: np.ndarray) -> np.ndarray:
    """Rescale columns with norm above 1 onto the unit sphere."""
    D = np.array(D, dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    big = norms > 1.0 + NORM_SLACK
    D[:, big] /= norms[big]
    return D


def incoherence(D: np.ndarray) -> float:
    """``||D^T D - I||_F^2``."""
    D = np.asarray(D, dtype=np.float64)
    G = D.T @ D
    G[np.diag_indices_from(G)] -= 1.0
    return float(np.sum(G * G))


def babel(D: np.ndarray, s: int) -> float:
    """Babel function: worst-case sum of ``s`` largest ``|d_j^T d_i|``, ``j != i``."""
    D = np.asarray(D, dtype=np.float64)
    K = D.shape[1]
    if not 1 <= s <= K - 1:
        raise ValueError(f"s must be in [1, {K - 1}], got {s}")
    G = np.abs(D.T @ D)
    np.fill_diagonal(G, -np.inf)
    top = -np.sort(-G, axis=0)[:s]
    return float(top.sum(axis=0).max())


def mutual_coherence(D: np.ndarray) -> float:
    Dn = np.asarray(D, dtype=np.float64) / np.linalg.norm(D, axis=0)
    return babel(Dn, 1)


def _system(B, D_t, kappa, eta):
    M = B @ B.T
    if kappa or eta:
        Gt = D_t.T @ D_t
        M = M + 2.0 * kappa * Gt
        M[np.diag_indices_from(M)] += 2.0 * eta * np.diag(Gt)
    return M


def _solve_right(R, M):
    """Return ``R M^{-1}`` and whether a ridge was needed."""
    try:
        c = scipy.linalg.cho_factor(M, lower=False, check_finite=False)
        sol = scipy.linalg.cho_solve(c, R.T, check_finite=False).T
        if np.all(np.isfinite(sol)):
            return sol, False
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.mean(np.abs(np.diag(M)))))
    Mr = M + RIDGE * scale * np.eye(M.shape[0])
    try:
        c = scipy.linalg.cho_factor(Mr, lower=False, check_finite=False)
        sol = scipy.linalg.cho_solve(c, R.T, check_finite=False).T
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(Mr, R.T, rcond=None)[0].T
    return sol, True


def solve_dictionary(
    X: np.ndarray,
    B: np.ndarray,
    D_t: np.ndarray,
    pens: UpdatePenalties = UpdatePenalties(),
) -> tuple[np.ndarray, bool]:
    """Unprojected penalized MOD solution.

    Solves ``D (B B^T + 2k D_t^T D_t + 2e diag(D_t^T D_t)) = X B^T + 2(k+e) D_t``
    for ``D``. At ``kappa = eta = 0`` this is the least-squares update
    ``X B^T (B B^T)^{-1}``. Returns ``(D, ridged)``.
    """
    X = np.asarray(X, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    D_t = np.asarray(D_t, dtype=np.float64)
    for name, arr in (("X", X), ("B", B), ("D_t", D_t)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in {name}")
    kappa, eta = pens.kappa, pens.eta
    R = X @ B.T
    if kappa or eta:
        R = R + 2.0 * (kappa + eta) * D_t

    used = np.any(B != 0, axis=1)
    if not (kappa or eta) and not used.all():
        # unused atoms decouple at zero penalty; solve the reduced system exactly
        D = np.zeros_like(D_t)
        if used.any():
            sub, ridged = _solve_right(R[:, used], _system(B[used], None, 0.0, 0.0))
            D[:, used] = sub
        else:
            ridged = False
        return D, ridged
    return _solve_right(R, _system(B, D_t, kappa, eta))


def dictionary_update(
    X: np.ndarray,
    B: np.ndarray,
    D_t: np.ndarray,
    pens: UpdatePenalties = UpdatePenalties(),
    *,
    replace_unused: bool = True,
    return_info: bool = False,
):
    """One dictionary step: penalized MOD solve, re-seed unused atoms, project.

    Atoms whose code row is identically zero are replaced by the worst
    reconstructed data samples (normalized). Every returned column has
    ``||d_j||_2 <= 1``.
    """
    D, ridged = solve_dictionary(X, B, D_t, pens)
    if ridged:
        warnings.warn("singular dictionary system; added ridge", SingularUpdateWarning, stacklevel=2)
    D_solved = D.copy() if return_info else None
    replaced = np.array([], dtype=int)
    if replace_unused:
        unused = np.flatnonzero(~np.any(np.asarray(B) != 0, axis=1))
        X = np.asarray(X, dtype=np.float64)
        norms = np.linalg.norm(X, axis=0)
        if unused.size and np.any(norms > 0):
            resid = np.linalg.norm(X - D @ B, axis=0)
            resid[norms == 0] = -np.inf
            order = np.argsort(-resid, kind="stable")
            picks = order[np.arange(unused.size) % max(1, int(np.sum(norms > 0)))]
            D[:, unused] = X[:, picks] / norms[picks]
            replaced = unused
    D = project_columns(D)
    if return_info:
        return D, UpdateInfo(ridged=ridged, replaced=replaced, unprojected=D_solved)
    return D
