"""Covering-number and generalization-gap calculators.

These evaluate closed-form rates for given problem sizes. ``kernel_l1`` is
normally an empirical estimate (see :func:`ssc.kernels.kernel_l1_norm_estimate`),
so the outputs are diagnostics rather than certified bounds for a run.

With ``squared_loss=True`` the logarithm gains an additive ``ln 2``, which
accounts for the squared form of the reconstruction loss.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

LAMBDA_MIN = math.e / 4
FAST_MIN_DK = 20
FAST_MIN_N = 5000
FAST_MULTIPLIER = 1.1


class BoundWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BoundParams:
    d: int
    K: int
    n: int
    lam: float
    gamma: float
    kernel_l1: float
    t: float = 1.0

    def __post_init__(self):
        for name in ("d", "K", "n"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not self.lam > LAMBDA_MIN:
            raise ValueError(f"lam must exceed e/4 ~ {LAMBDA_MIN:.6f}, got {self.lam}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not self.kernel_l1 > 0:
            raise ValueError(f"kernel_l1 must be > 0, got {self.kernel_l1}")
        if not self.t > 0:
            raise ValueError(f"t must be > 0, got {self.t}")

    @property
    def dK(self) -> int:
        return int(self.d) * int(self.K)


def _log(arg: float, squared_loss: bool) -> float:
    if not arg > 0:
        raise ValueError(f"log argument must be positive, got {arg}")
    return math.log(2.0 * arg if squared_loss else arg)


def covering_log_cardinality(p: BoundParams, eps: float, *, squared_loss: bool = False) -> float:
    """``dK * ln(4 lam |K|_1 / (eps (1 - gamma)))``."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return p.dK * _log(4.0 * p.lam * p.kernel_l1 / (eps * (1.0 - p.gamma)), squared_loss)


def generalization_gap_slow(p: BoundParams, *, squared_loss: bool = False) -> float:
    """Root-n gap between expected and empirical reconstruction risk.

        sqrt(dK ln(4 sqrt(n) lam |K|_1 / (1 - gamma)) / (2n))
          + sqrt(t / (2n)) + sqrt(4 / n)

    Warns with :class:`BoundWarning` when the log argument is at most 1, in
    which case the first term is not meaningful.
    """
    n = int(p.n)
    arg = 4.0 * math.sqrt(n) * p.lam * p.kernel_l1 / (1.0 - p.gamma)
    if (2.0 * arg if squared_loss else arg) <= 1.0:
        warnings.warn(f"log argument {arg:g} <= 1; slow-rate bound is vacuous here", BoundWarning, stacklevel=2)
    log_term = _log(arg, squared_loss)
    first = math.sqrt(max(p.dK * log_term, 0.0) / (2 * n))
    return first + math.sqrt(p.t / (2 * n)) + math.sqrt(4.0 / n)


class FastBound(NamedTuple):
    multiplier: float
    additive: float


def fast_preconditions_met(p: BoundParams) -> bool:
    return p.dK > FAST_MIN_DK and p.n >= FAST_MIN_N


def generalization_gap_fast(p: BoundParams, *, squared_loss: bool = False) -> FastBound:
    """Order-1/n bound ``E_P <= multiplier * E_Pn + additive``.

    ``additive = 9 (dK ln(4 n lam |K|_1 / (1 - gamma)) + t) / n``. The rate
    needs ``dK > 20`` and ``n >= 5000``; outside that range the value is still
    returned, with a :class:`BoundWarning`.
    """
    if not fast_preconditions_met(p):
        warnings.warn(
            f"fast rate assumes dK > {FAST_MIN_DK} and n >= {FAST_MIN_N} (got dK={p.dK}, n={p.n})",
            BoundWarning,
            stacklevel=2,
        )
    n = int(p.n)
    log_term = _log(4.0 * n * p.lam * p.kernel_l1 / (1.0 - p.gamma), squared_loss)
    return FastBound(FAST_MULTIPLIER, 9.0 * (p.dK * log_term + p.t) / n)


def bound_report(p: BoundParams, eps: float, *, squared_loss: bool = False) -> dict:
    """All three quantities, keyed for ``key=value`` printing."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundWarning)
        cover = covering_log_cardinality(p, eps, squared_loss=squared_loss)
        slow = generalization_gap_slow(p, squared_loss=squared_loss)
        fast = generalization_gap_fast(p, squared_loss=squared_loss)
    return {
        "covering_log_cardinality": cover,
        "generalization_gap_slow": slow,
        "fast_multiplier": fast.multiplier,
        "fast_additive": fast.additive,
        "fast_preconditions_met": fast_preconditions_met(p),
        "warnings": [str(w.message) for w in caught],
    }
