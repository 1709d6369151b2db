import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stlmpc.formula import (
    INF,
    And,
    EmptyIntervalError,
    Eventually,
    FormulaError,
    Globally,
    Interval,
    Not,
    Or,
    Predicate,
    UnboundedFormulaError,
    Until,
    bound,
    depth,
    dimensions,
    horizon_steps,
    is_bounded,
    is_snn,
    predicates,
    size,
    to_steps,
    uses_inputs,
)

p = Predicate.gt("x1", 1.0)
q = Predicate.lt("x2", 0.5)


def test_predicate_normalises_trailing_zeros():
    assert Predicate((1.0, 0.0, 0.0), (), (), -1.0) == p
    assert hash(Predicate((1.0, 0.0), (0.0,), (), -1.0)) == hash(p)


def test_predicate_value_and_negation():
    assert p.value([3.0, 0.0]) == pytest.approx(2.0)
    assert q.value([0.0, -1.0]) == pytest.approx(1.5)
    assert p.negated().value([3.0]) == pytest.approx(-2.0)
    mixed = Predicate((1.0,), (2.0,), (-1.0,), 0.5)
    assert mixed.value([1.0], [1.0], [4.0]) == pytest.approx(-0.5)


def test_predicate_rejects_short_signal_and_nan():
    with pytest.raises(FormulaError):
        Predicate.gt("x3", 0).value([1.0, 2.0])
    with pytest.raises(FormulaError):
        Predicate((math.nan,))


def test_interval_validation():
    with pytest.raises(FormulaError):
        Interval(-1.0, 2.0)
    with pytest.raises(FormulaError):
        Interval(3.0, 2.0)
    with pytest.raises(FormulaError):
        Interval(INF)
    assert not Interval(1.0).bounded


def test_connectives_need_operands():
    with pytest.raises(FormulaError):
        And()
    with pytest.raises(FormulaError):
        Or([])
    assert And([p, q]) == And(p, q)


def test_structural_measures():
    phi = Globally(Interval(0, 2), And(p, Eventually(Interval(1, 3), Not(q))))
    assert size(phi) == 4
    assert depth(phi) == 4
    assert bound(phi) == 5.0
    assert horizon_steps(phi, 0.5) == 10
    assert set(predicates(phi)) == {p, q}
    assert dimensions(phi) == (2, 0, 0)
    assert not uses_inputs(phi)
    assert uses_inputs(And(p, Predicate.gt("u1", 0)))


def test_bound_of_until_and_unbounded():
    phi = Until(Interval(0, 4), p, Eventually(Interval(0, 1), q))
    assert bound(phi) == 5.0
    assert is_bounded(phi)
    unb = Eventually(Interval(2), p)
    assert not is_bounded(unb)
    with pytest.raises(UnboundedFormulaError):
        bound(unb)
    with pytest.raises(UnboundedFormulaError):
        horizon_steps(unb, 1.0)


def test_snn_fragment():
    assert is_snn(Globally(Interval(0, 1), And(p, Not(q))))
    assert not is_snn(Not(Globally(Interval(0, 1), p)))
    assert not is_snn(Or(p, q))
    assert not is_snn(Eventually(Interval(0, 1), p))


def test_to_steps_snaps_float_endpoints():
    # 0.3 / 0.1 is 2.9999999999999996 in floating point
    s = to_steps(Interval(0.3, 0.7), 0.1)
    assert (s.lo_idx, s.hi_idx) == (3, 7)
    assert to_steps(Interval(0.25, 1.0), 0.5).lo_idx == 1
    assert to_steps(Interval(1.0), 0.5).hi_idx is None
    with pytest.raises(EmptyIntervalError):
        to_steps(Interval(0.2, 0.3), 0.5)
    with pytest.raises(FormulaError):
        to_steps(Interval(0, 1), 0.0)


@given(a=st.integers(0, 40), extra=st.integers(0, 40), dt=st.sampled_from([0.1, 0.025, 0.2, 1.0, 0.3]))
def test_to_steps_exact_on_grid(a, extra, dt):
    """Endpoints that are whole multiples of dt map to those multiples."""
    s = to_steps(Interval(a * dt, (a + extra) * dt), dt)
    assert (s.lo_idx, s.hi_idx) == (a, a + extra)


@given(lo=st.floats(0, 10), width=st.floats(0, 10), dt=st.floats(0.01, 2.0))
def test_to_steps_contains_exactly_grid_points(lo, width, dt):
    hi = lo + width
    try:
        s = to_steps(Interval(lo, hi), dt)
    except EmptyIntervalError:
        ks = range(math.floor(lo / dt), math.ceil(hi / dt) + 1)
        assert not any(lo + 1e-8 * dt < k * dt < hi - 1e-8 * dt for k in ks)
        return
    for k in (s.lo_idx, s.hi_idx):
        assert lo - 1e-8 * dt <= k * dt <= hi + 1e-8 * dt
    assert (s.lo_idx - 1) * dt < lo + 1e-8 * dt
    assert (s.hi_idx + 1) * dt > hi - 1e-8 * dt


def test_predicate_helpers_are_one_based():
    pred = Predicate.gt("w2", 3.0)
    assert pred.coeffs_w == (0.0, 1.0)
    assert pred.value([], [], np.array([0.0, 5.0])) == pytest.approx(2.0)
