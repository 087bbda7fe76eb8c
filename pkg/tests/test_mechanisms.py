import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpmarket.core import EMPTY, QualityFunction
from mpmarket.mechanisms import (MECHANISMS, Mechanism, best_model_allocation, best_model_rule,
                                 build_mechanism, efficient_allocation_linear,
                                 efficient_linear_rule, free_mechanism, give_withhold_family,
                                 mep_mechanism, mep_payment, run_mechanism, shifted_payment,
                                 vcg_allocation_rule, vcg_mechanism, zero_payment)
from mpmarket.valuations import (LinearExternalityModel, PowerMarketModel,
                                 ProportionalFixedMarketModel)

ID = QualityFunction.identity()
ALPHA = np.array([[1.0, -0.5], [0.2, 2.0]])


def test_best_model_pools_participants_only():
    Q = QualityFunction.linear(3.0)
    np.testing.assert_allclose(best_model_allocation(Q, [1.0, EMPTY, 2.0]), [1.0, 0.0, 1.0])
    np.testing.assert_allclose(best_model_allocation(Q, [0.0, 0.0, 1.5]), [0.5, 0.5, 0.5])


def test_efficient_linear_excludes_negative_columns():
    alpha = np.array([[1.0, -2.0], [0.5, 1.0]])  # column sums 1.5 and -1
    x = efficient_allocation_linear(alpha, ID, [0.25, 0.5])
    np.testing.assert_allclose(x, [0.75, 0.5])
    x = efficient_allocation_linear(alpha, ID, [0.25, EMPTY])
    np.testing.assert_allclose(x, [0.25, 0.0])


def test_mep_hand_computation():
    # both columns of ALPHA sum positive, so both get Q(0.7)
    # agent 0 exits: q = (Q(0.3), Q(0.4)) -> v_0 = 0.3 - 0.2 = 0.1, v_0(in) = 0.35
    # agent 1 exits: q = (Q(0.3), Q(0.4)) -> v_1 = 0.06 + 0.8 = 0.86, v_1(in) = 1.54
    model = LinearExternalityModel(ALPHA)
    p = mep_payment(efficient_linear_rule(ALPHA, ID), model, ID, [0.3, 0.4])
    np.testing.assert_allclose(p, [0.25, 0.68], atol=1e-15)


def test_mep_charges_nothing_to_absent_agents():
    model = LinearExternalityModel(ALPHA)
    p = mep_payment(efficient_linear_rule(ALPHA, ID), model, ID, [0.3, EMPTY])
    assert p[1] == 0.0
    # alone in the market: nothing to gain from participating
    assert p[0] == pytest.approx(0.0)


alphas = st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=9, max_size=9)
types3 = st.lists(st.floats(0.0, 3.0, allow_nan=False), min_size=3, max_size=3)


def _positive_diag(vals):
    a = np.array(vals).reshape(3, 3)
    np.fill_diagonal(a, np.abs(np.diag(a)) + 1e-3)
    return a


@settings(max_examples=60)
@given(alphas, types3)
def test_mep_truthful_participation_is_exactly_break_even(vals, types):
    alpha = _positive_diag(vals)
    Q = QualityFunction.sigmoid()
    model = LinearExternalityModel(alpha)
    mech = mep_mechanism(efficient_linear_rule(alpha, Q), model, Q, 3)
    honest = run_mechanism(mech, model, Q, types)
    for i in range(3):
        out = list(types)
        out[i] = EMPTY
        exit_u = run_mechanism(mech, model, Q, types, out).utilities[i]
        assert honest.utilities[i] == pytest.approx(exit_u, abs=1e-12)


@settings(max_examples=60)
@given(alphas, types3, st.integers(0, 2), st.floats(0.0, 1.0))
def test_mep_under_reporting_never_pays(vals, types, i, frac):
    alpha = _positive_diag(vals)
    Q = QualityFunction.sigmoid()
    model = LinearExternalityModel(alpha)
    mech = mep_mechanism(efficient_linear_rule(alpha, Q), model, Q, 3)
    lie = list(types)
    lie[i] = types[i] * frac
    honest = run_mechanism(mech, model, Q, types).utilities[i]
    lying = run_mechanism(mech, model, Q, types, lie).utilities[i]
    assert lying <= honest + 1e-9


def test_batched_and_scalar_paths_agree():
    Q = QualityFunction.sigmoid()
    rng = np.random.default_rng(3)
    alpha = rng.uniform(-1, 1, (3, 3))
    model = LinearExternalityModel(alpha)
    mech = mep_mechanism(efficient_linear_rule(alpha, Q), model, Q, 3)
    r = rng.uniform(0, 2, (20, 3))
    present = rng.uniform(size=(20, 3)) < 0.7
    batch = mech.payment.charge(np.where(present, r, 0.0), present)
    for k in range(20):
        prof = [float(v) if p else EMPTY for v, p in zip(r[k], present[k])]
        np.testing.assert_allclose(mech.payment(prof), batch[k], atol=1e-14)


def test_vcg_fixed_market_counterexample():
    Q = QualityFunction.linear(20.0)
    model = ProportionalFixedMarketModel(2)
    mech = vcg_mechanism(model, [best_model_rule(Q)], Q, 2)
    assert run_mechanism(mech, model, Q, (10, 1)).utilities[0] == pytest.approx(10 / 11, abs=1e-12)
    assert run_mechanism(mech, model, Q, (10, 1), (3, 1)).utilities[0] == \
        pytest.approx(27 / 28, abs=1e-12)


def test_vcg_picks_welfare_maximizer_with_first_member_tie_break():
    Q = QualityFunction.linear(2.0)
    fam = give_withhold_family(2, Q)
    assert fam[0].label == "give[11]" and len(fam) == 4
    # with no externalities everybody wants the pooled model
    model = LinearExternalityModel(np.eye(2))
    rule = vcg_allocation_rule(model, Q, fam)
    np.testing.assert_allclose(rule([1.0, 0.5]), [0.75, 0.75])
    # all-zero reports: every member ties, the first wins
    np.testing.assert_allclose(rule([0.0, 0.0]), [0.0, 0.0])
    # a strongly harmful agent 1 should be denied the pooled model
    harm = LinearExternalityModel(np.array([[1.0, -3.0], [0.0, 1.0]]))
    np.testing.assert_allclose(vcg_allocation_rule(harm, Q, fam)([1.0, 0.5]), [0.75, 0.25])
    with pytest.raises(ValueError):
        vcg_allocation_rule(model, Q, [])


def test_free_mechanism_and_shifted_payments():
    Q = QualityFunction.linear(2.0)
    free = free_mechanism(Q, 2)
    assert free.label == "free"
    np.testing.assert_array_equal(free.payment([1.0, 1.0]), 0.0)
    bumped = shifted_payment(zero_payment(), 0.5, agent=1)
    np.testing.assert_array_equal(bumped([1.0, 1.0]), [0.0, 0.5])
    np.testing.assert_array_equal(bumped([1.0, EMPTY]), [0.0, 0.0])
    only = shifted_payment(zero_payment(), 0.1,
                           where=lambda r, p: r[..., 0] > 0.5)
    np.testing.assert_array_equal(only([1.0, 1.0]), [0.1, 0.1])
    np.testing.assert_array_equal(only([0.2, 1.0]), [0.0, 0.0])


def test_run_mechanism_validates_inputs():
    model = LinearExternalityModel(ALPHA)
    mech = build_mechanism("mep+efficient-linear", model, ID)
    with pytest.raises(ValueError, match="above true type"):
        run_mechanism(mech, model, ID, (0.3, 0.4), (0.5, 0.4))
    with pytest.raises(ValueError):
        run_mechanism(mech, model, ID, (0.3, 0.4, 0.1))
    with pytest.raises(ValueError):
        run_mechanism(mech, model, ID, (0.9, 1.4))  # outside the quality domain
    out = run_mechanism(mech, model, ID, (0.3, 0.4), (0.3, EMPTY))
    assert out.payments[1] == 0.0
    np.testing.assert_allclose(out.utilities, out.values - out.payments)


def test_build_mechanism_names():
    model = PowerMarketModel(0.0, 2)
    Q = QualityFunction.linear(2.0)
    for name in MECHANISMS[1:]:
        assert isinstance(build_mechanism(name, model, Q), Mechanism)
    with pytest.raises(ValueError):
        build_mechanism("mep+efficient-linear", model, Q)
    with pytest.raises(KeyError):
        build_mechanism("second-price", model, Q)
    with pytest.raises(ValueError):
        build_mechanism("free", PowerMarketModel(0.0), Q)
