import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpmarket.core import (EMPTY, GridSpec, Outcome, QualityFunction, ReportProfile, TypeProfile,
                           as_batch, check_quality_function, effective_quality, grid_points,
                           is_empty, quality_function)

sizes = st.floats(0.0, 40.0, allow_nan=False)


@pytest.mark.parametrize("Q", [QualityFunction.identity(), QualityFunction.linear(7.0),
                               QualityFunction.sigmoid()])
def test_quality_functions_are_valid(Q):
    check_quality_function(Q, np.random.default_rng(0))
    assert Q(0.0) == 0.0


@given(a=sizes, b=sizes)
def test_sigmoid_monotone_and_bounded(a, b):
    Q = QualityFunction.sigmoid()
    lo, hi = min(a, b), max(a, b)
    assert 0.0 <= Q(lo) <= Q(hi) <= 1.0


def test_sigmoid_matches_closed_form():
    Q = QualityFunction.sigmoid()
    t = np.linspace(0, 10, 11)
    np.testing.assert_allclose(Q(t), (1 - np.exp(-t)) / (1 + np.exp(-t)), rtol=1e-14)
    assert Q(6.0) == pytest.approx(0.9950547536867305, abs=1e-15)


def test_identity_domain_is_enforced():
    with pytest.raises(ValueError):
        QualityFunction.identity(2.0)
    with pytest.raises(ValueError):
        QualityFunction.identity()(1.5)
    with pytest.raises(ValueError):
        QualityFunction.sigmoid()(-0.1)


def test_linear_rescales_identity():
    Q = QualityFunction.linear(4.0)
    assert Q(1.0) == 0.25 and Q(4.0) == 1.0
    assert QualityFunction.linear(1.0).label == "identity"
    assert float(Q.grad(np.array(2.0))) == 0.25


def test_check_quality_function_rejects_bad_functions():
    flat = QualityFunction(lambda s: np.where(s < 0.5, s, 1.0 - s), "peaked", 1.0)
    with pytest.raises(AssertionError, match="not increasing"):
        check_quality_function(flat, np.random.default_rng(1))
    shifted = QualityFunction(lambda s: s + 0.1, "shifted", 0.9)
    with pytest.raises(AssertionError, match="Q\\(0\\)"):
        check_quality_function(shifted, np.random.default_rng(1))


def test_quality_function_factory():
    assert quality_function("linear", scale=3.0)(3.0) == 1.0
    with pytest.raises(KeyError):
        quality_function("cubic")


def test_effective_quality():
    Q = QualityFunction.identity()
    assert effective_quality(0.3, Q, 0.6) == 0.6
    assert effective_quality(0.8, Q, 0.6) == 0.8
    with pytest.raises(ValueError):
        effective_quality(1.2, Q, 0.1)
    with pytest.raises(ValueError):
        effective_quality(0.5, Q, -1.0)


def test_empty_is_not_zero():
    r = ReportProfile((0.0, EMPTY))
    values, present = r.as_arrays()
    assert present.tolist() == [True, False]
    assert values.tolist() == [0.0, 0.0]
    assert is_empty(r.reports[1]) and not is_empty(r.reports[0])
    assert ReportProfile((None, 1.0)).reports[0] is EMPTY


def test_reports_capped_by_types():
    types = TypeProfile((1.0, 2.0))
    ReportProfile((1.0, EMPTY)).check_against(types)
    with pytest.raises(ValueError, match="above true type"):
        ReportProfile((1.5, 2.0)).check_against(types)
    with pytest.raises(ValueError):
        ReportProfile((1.0,)).check_against(types)
    with pytest.raises(ValueError):
        TypeProfile((-1.0,))


def test_as_batch_accepts_all_forms():
    v, p = as_batch([0.5, EMPTY])
    assert v.tolist() == [0.5, 0.0] and p.tolist() == [True, False]
    same = as_batch((v, p))
    assert same[0] is v


def test_grid_spec():
    g = GridSpec(1.0, 0.25)
    assert g.size == 5 and g.disparity == 4
    np.testing.assert_allclose(g.values(), [0, 0.25, 0.5, 0.75, 1.0])
    assert grid_points(GridSpec(1.0, 0.5, include_empty=True)) == [EMPTY, 0.0, 0.5, 1.0]
    assert g.index(0.75) == 3
    assert GridSpec.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GridSpec(1.0, 0.3)
    with pytest.raises(ValueError):
        GridSpec(0.0, 0.1)


@given(st.integers(1, 60), st.sampled_from([0.1, 0.25, 0.5, 1.0, 2.0]))
def test_grid_index_round_trips(d, step):
    g = GridSpec(d * step, step)
    assert g.index(g.values()).tolist() == list(range(g.size))


def test_outcome_totals():
    out = Outcome(np.zeros(2), np.array([0.5, -0.25]), np.zeros(2), np.array([1.0, 2.0]),
                  np.array([0.5, 2.25]))
    assert out.revenue == 0.25 and out.welfare == 3.0
    assert math.isclose(out.utilities.sum(), out.welfare - out.revenue)
