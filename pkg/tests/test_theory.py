import math
import warnings

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ssc.theory import (
    BoundParams,
    BoundWarning,
    bound_report,
    covering_log_cardinality,
    generalization_gap_fast,
    generalization_gap_slow,
)


def params(**kw):
    base = dict(d=2, K=4, n=10000, lam=1.0, gamma=0.5, kernel_l1=1.0, t=1.0)
    base.update(kw)
    return BoundParams(**base)


# -- covering number ---------------------------------------------------------

def test_covering_hand_value():
    p = params(d=3, K=4, gamma=0.0)
    assert abs(covering_log_cardinality(p, 0.5) - 12 * math.log(8)) <= 1e-12


def test_covering_unit_argument_is_zero():
    p = params(lam=1.0, kernel_l1=0.125, gamma=0.5)
    # 4 * 1 * 0.125 / (eps * 0.5) = 1 at eps = 1
    assert covering_log_cardinality(p, 1.0) == 0.0


def test_covering_linear_in_dk():
    a = covering_log_cardinality(params(d=2, K=4), 0.1)
    assert covering_log_cardinality(params(d=4, K=4), 0.1) == pytest.approx(2 * a, rel=1e-15)


def test_covering_squared_loss_adds_log2():
    p = params()
    delta = covering_log_cardinality(p, 0.1, squared_loss=True) - covering_log_cardinality(p, 0.1)
    assert delta == pytest.approx(p.dK * math.log(2), rel=1e-12)


def test_covering_rejects_bad_eps():
    with pytest.raises(ValueError):
        covering_log_cardinality(params(), 0.0)


@given(st.floats(1e-4, 10), st.floats(1e-4, 10))
def test_covering_decreasing_in_eps(e1, e2):
    assume(abs(e1 - e2) > 1e-9 * max(e1, e2))
    lo, hi = sorted((e1, e2))
    p = params()
    assert covering_log_cardinality(p, lo) > covering_log_cardinality(p, hi)


# -- slow rate ---------------------------------------------------------------

def test_slow_hand_value():
    p = params()
    expected = math.sqrt(8 * math.log(4 * 100 * 1 * 1 / 0.5) / 20000) + math.sqrt(1 / 20000) + math.sqrt(4 / 10000)
    assert abs(generalization_gap_slow(p) - expected) <= 1e-12


def test_slow_t_term_vanishes():
    a = generalization_gap_slow(params(t=1e-300))
    b = generalization_gap_slow(params(t=1.0))
    assert b - a == pytest.approx(math.sqrt(1 / 20000), rel=1e-9)


def test_slow_third_term_scaling():
    n = 10000
    assert math.sqrt(4 / (100 * n)) == pytest.approx(math.sqrt(4 / n) / 10, rel=1e-15)


def test_slow_warns_when_log_argument_small():
    p = params(n=1, lam=0.7, kernel_l1=0.1, gamma=0.0)
    with pytest.warns(BoundWarning, match="vacuous"):
        generalization_gap_slow(p)


GRID = st.fixed_dictionaries(
    dict(
        d=st.integers(1, 50),
        K=st.integers(1, 200),
        n=st.integers(10, 10**7),
        lam=st.floats(1.0, 1e3),
        gamma=st.floats(0.0, 0.99),
        kernel_l1=st.floats(0.5, 1e3),
        t=st.floats(1e-3, 10),
    )
)


@given(GRID, st.floats(1.01, 100))
def test_slow_decreasing_in_n(kw, factor):
    p = BoundParams(**kw)
    m = int(p.n * factor) + 1
    assert generalization_gap_slow(BoundParams(**{**kw, "n": m})) < generalization_gap_slow(p)


@pytest.mark.parametrize("field", ["kernel_l1", "lam", "gamma"])
@given(kw=GRID, factor=st.floats(1.01, 5))
def test_gaps_increasing_in_parameters(field, kw, factor):
    p = BoundParams(**kw)
    if field == "gamma":
        bumped = 1 - (1 - p.gamma) / factor
        assume(bumped < 1 and bumped > p.gamma)
    else:
        bumped = getattr(p, field) * factor
    q = BoundParams(**{**kw, field: bumped})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundWarning)
        assert generalization_gap_slow(q) > generalization_gap_slow(p)
        assert generalization_gap_fast(q).additive > generalization_gap_fast(p).additive


# -- fast rate ---------------------------------------------------------------

def test_fast_hand_value():
    p = params(d=5, K=8, n=5000, gamma=0.0, t=2.0)
    mult, add = generalization_gap_fast(p)
    assert mult == 1.1
    assert abs(add - 9 * (40 * math.log(20000) + 2) / 5000) <= 1e-12


def test_fast_linear_in_t():
    p1 = params(d=5, K=8, n=5000, t=1.0)
    p2 = params(d=5, K=8, n=5000, t=2.0)
    diff = generalization_gap_fast(p2).additive - generalization_gap_fast(p1).additive
    assert diff == pytest.approx(9 / 5000, rel=1e-9)


def test_fast_precondition_warning():
    with pytest.warns(BoundWarning, match="fast rate assumes"):
        mult, add = generalization_gap_fast(params(d=2, K=4, n=100))
    assert mult == 1.1 and add > 0
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundWarning)
        generalization_gap_fast(params(d=5, K=8, n=5000))


def test_fast_roughly_inverse_n():
    a = generalization_gap_fast(params(d=5, K=8, n=10000)).additive
    b = generalization_gap_fast(params(d=5, K=8, n=20000)).additive
    assert 0.5 < b / a < 0.6


# -- validation and report ---------------------------------------------------

@pytest.mark.parametrize(
    "kw", [dict(gamma=1.0), dict(gamma=-0.1), dict(lam=0.6), dict(kernel_l1=0.0), dict(n=0), dict(t=0.0), dict(d=1.5)]
)
def test_param_validation(kw):
    with pytest.raises(ValueError):
        params(**kw)


def test_report_collects_warnings():
    rep = bound_report(params(d=3, K=4, gamma=0.0), 0.5)
    assert rep["covering_log_cardinality"] == pytest.approx(12 * math.log(8), abs=1e-12)
    assert rep["fast_preconditions_met"] is False
    assert any("fast rate" in w for w in rep["warnings"])
