"""Hot column-wise kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``SSC_DISABLE_NUMBA`` is unset (or ``0``). Set
``SSC_DISABLE_NUMBA=1`` to force the vectorized numpy versions. Both paths
compute the same quantities. The numba thresholding kernel selects the
admitted set in expected linear time instead of sorting; it can differ from
the numpy path only when a prefix sum lands within rounding of the budget.

Every kernel works on column-major data: one sample (or one code) per column.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.spatial.distance import cdist

KERNEL_IDS = {"uniform": 0, "triangular": 1, "tricube": 2, "gaussian": 3}


def _env_disabled() -> bool:
    return os.environ.get("SSC_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _env_disabled():
        raise ImportError("numba disabled by SSC_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy reference implementations (always importable, used as fallback and
# by the backend benchmark)
# --------------------------------------------------------------------------


def kernel_values_numpy(u: np.ndarray, kernel_id: int) -> np.ndarray:
    a = np.abs(np.asarray(u, dtype=np.float64))
    if kernel_id == 0:
        return np.where(a <= 1.0, 1.0, 0.0)
    if kernel_id == 1:
        return np.where(a <= 1.0, 1.0 - a, 0.0)
    if kernel_id == 2:
        return np.where(a <= 1.0, (1.0 - a**3) ** 3, 0.0)
    return np.exp(-0.5 * a * a)


def pairwise_euclidean_numpy(X: np.ndarray) -> np.ndarray:
    # cdist works on differences, so identical samples give exactly 0
    return cdist(X.T, X.T, metric="euclidean")


def budget_threshold_numpy(A: np.ndarray, lam: float) -> np.ndarray:
    absA = np.abs(A)
    order = np.argsort(-absA, axis=0, kind="stable")
    running = np.cumsum(np.take_along_axis(absA, order, axis=0), axis=0)
    keep_sorted = running <= lam
    keep = np.zeros_like(keep_sorted)
    np.put_along_axis(keep, order, keep_sorted, axis=0)
    return np.where(keep, A, 0.0)


def project_l1_numpy(V: np.ndarray, lam: float) -> np.ndarray:
    absV = np.abs(V)
    out = V.copy()
    outside = absV.sum(axis=0) > lam
    if not outside.any():
        return out
    a = absV[:, outside]
    u = -np.sort(-a, axis=0)
    css = np.cumsum(u, axis=0) - lam
    j = np.arange(1, a.shape[0] + 1, dtype=np.float64)[:, None]
    positive = u * j > css
    # last index where the shrink condition holds
    rho = a.shape[0] - 1 - np.argmax(positive[::-1], axis=0)
    theta = css[rho, np.arange(a.shape[1])] / (rho + 1.0)
    out[:, outside] = np.sign(V[:, outside]) * np.maximum(a - theta, 0.0)
    return out


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, inline="always")
    def _kernel_scalar(u, kernel_id):
        a = abs(u)
        if kernel_id == 0:
            return 1.0 if a <= 1.0 else 0.0
        if kernel_id == 1:
            return 1.0 - a if a <= 1.0 else 0.0
        if kernel_id == 2:
            if a > 1.0:
                return 0.0
            c = 1.0 - a * a * a
            return c * c * c
        return np.exp(-0.5 * a * a)

    @njit(parallel=True, cache=True)
    def _kernel_values_nb(u, kernel_id):
        flat = u.ravel()
        out = np.empty(flat.size)
        for i in prange(flat.size):
            out[i] = _kernel_scalar(flat[i], kernel_id)
        return out.reshape(u.shape)

    @njit(parallel=True, cache=True)
    def _pairwise_euclidean_nb(X):
        d, n = X.shape
        out = np.zeros((n, n))
        for i in prange(n):
            for j in range(i + 1, n):
                s = 0.0
                for r in range(d):
                    diff = X[r, i] - X[r, j]
                    s += diff * diff
                out[i, j] = np.sqrt(s)
        for i in range(n):
            for j in range(i + 1, n):
                out[j, i] = out[i, j]
        return out

    @njit(cache=True, inline="always")
    def _ranks_above(a, u, v):
        # strict order on (|alpha| desc, index asc); keys are unique
        return a[u] > a[v] or (a[u] == a[v] and u < v)

    @njit(cache=True)
    def _budget_prefix(a, lam, perm):
        """Selection-based top-s budget rule in expected O(K).

        Leaves the admitted indices in ``perm[:s]`` and returns ``s``. A block
        of candidates ranked above a pivot is admitted whole when the budget
        allows, otherwise the search narrows to that block.
        """
        lo, hi = 0, a.size
        acc = 0.0
        while lo < hi:
            mid = (lo + hi) // 2
            last = hi - 1
            # median-of-three pivot, moved to the end
            x, y, z = perm[lo], perm[mid], perm[last]
            if _ranks_above(a, y, x):
                x, y = y, x
            if _ranks_above(a, z, y):
                y = z
                if _ranks_above(a, y, x):
                    y = x
            pos = lo if perm[lo] == y else (mid if perm[mid] == y else last)
            perm[pos], perm[last] = perm[last], perm[pos]
            p = perm[last]
            store = lo
            block = 0.0
            for r in range(lo, last):
                q = perm[r]
                if _ranks_above(a, q, p):
                    perm[store], perm[r] = q, perm[store]
                    block += a[q]
                    store += 1
            perm[store], perm[last] = perm[last], perm[store]
            if acc + block + a[p] <= lam:
                acc += block + a[p]
                lo = store + 1
            else:
                hi = store
        return lo

    @njit(parallel=True, cache=True)
    def _budget_threshold_nb(A, lam):
        K, n = A.shape
        out = np.zeros((K, n))
        for i in prange(n):
            a = np.abs(A[:, i])
            perm = np.arange(K)
            s = _budget_prefix(a, lam, perm)
            for r in range(s):
                k = perm[r]
                out[k, i] = A[k, i]
        return out

    @njit(parallel=True, cache=True)
    def _project_l1_nb(V, lam):
        K, n = V.shape
        out = V.copy()
        for i in prange(n):
            total = 0.0
            for k in range(K):
                total += abs(V[k, i])
            if total <= lam:
                continue
            u = -np.sort(-np.abs(V[:, i]))
            css = 0.0
            theta = 0.0
            for r in range(K):
                css += u[r]
                t = (css - lam) / (r + 1.0)
                if u[r] > t:
                    theta = t
            for k in range(K):
                v = V[k, i]
                m = abs(v) - theta
                if m > 0.0:
                    out[k, i] = m if v > 0.0 else -m
                else:
                    out[k, i] = 0.0
        return out


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def kernel_values(u: np.ndarray, kernel_id: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if HAS_NUMBA and u.ndim > 0:
        return _kernel_values_nb(np.ascontiguousarray(u), kernel_id)
    return kernel_values_numpy(u, kernel_id)


def pairwise_euclidean(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if HAS_NUMBA:
        return _pairwise_euclidean_nb(X)
    return pairwise_euclidean_numpy(X)


def budget_threshold(A: np.ndarray, lam: float) -> np.ndarray:
    """Per column keep the largest-|a| prefix whose absolute sum is <= lam."""
    A = np.asarray(A, dtype=np.float64)
    if HAS_NUMBA:
        return _budget_threshold_nb(A, float(lam))
    return budget_threshold_numpy(A, float(lam))


def project_l1(V: np.ndarray, lam: float) -> np.ndarray:
    """Euclidean projection of every column onto the L1 ball of radius lam."""
    V = np.asarray(V, dtype=np.float64)
    if HAS_NUMBA:
        return _project_l1_nb(V, float(lam))
    return project_l1_numpy(V, float(lam))


def set_num_threads(n: int) -> None:
    if HAS_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
