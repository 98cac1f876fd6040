import numpy as np
import pytest

from stoprule.core import GainSpec, PayoffSpec, option_gains
from stoprule.estimator import EstimatorConfig, fit_stopper
from stoprule.oracle import (
    FiniteModel,
    OracleCapacityError,
    brute_force_value,
    exact_continuation,
    exact_value_and_rule,
    gap_bound_check,
    gap_bound_holds,
)
from stoprule.simulate import finite_paths

TWO_POINT = FiniteModel(kind="iid", support=[0.9, 1.1], law=[0.5, 0.5])
PUT = PayoffSpec.put(strike=100.0, rate=0.0)


def zero_gains(L):
    return GainSpec(horizon=L, bound=1.0, gains=tuple(lambda p: 0.0 for _ in range(L + 1)))


def test_zero_gains_give_zero_tables():
    tables = exact_continuation(TWO_POINT, zero_gains(3))
    assert all(v == 0.0 for t in range(4) for v in tables.q[t].values())
    value, t2 = exact_value_and_rule(TWO_POINT, zero_gains(3))
    assert value == 0.0
    assert t2.rule_decision(np.array([1.1, 1.1, 1.1])).tau == 0


def test_one_step_put_hand_dp():
    gains = option_gains(PUT, 1, bound=19.0)
    value, tables = exact_value_and_rule(TWO_POINT, gains)
    # q0 = 0.5*f(90) + 0.5*f(110) = 5; g0 = f(100) = 0
    assert tables.q[0][()] == pytest.approx(5.0, abs=1e-12)
    assert value == pytest.approx(5.0, abs=1e-12)
    assert tables.rule_decision(np.array([0.9])).tau == 1
    assert tables.rule_decision(np.array([1.1])).tau == 1


def test_value_function_is_max_of_gain_and_continuation():
    gains = option_gains(PUT, 2, bound=19.0)
    tables = exact_continuation(TWO_POINT, gains)
    from stoprule.core import gain_eval

    for t in range(3):
        for hist, q in tables.q[t].items():
            g = gain_eval(gains, t, TWO_POINT.support[list(hist)])
            assert tables.v[t][hist] == pytest.approx(max(g, q), abs=1e-12)
            assert 0.0 <= q <= gains.bound


@pytest.mark.parametrize(
    "model,L",
    [
        (TWO_POINT, 2),
        (TWO_POINT, 3),
        (FiniteModel(kind="iid", support=[0.9, 1.0, 1.1], law=[0.3, 0.4, 0.3]), 2),
        (FiniteModel(kind="iid", support=[0.9, 1.0, 1.1], law=[0.2, 0.5, 0.3]), 3),
        (
            FiniteModel(
                kind="markov",
                support=[0.92, 1.08],
                law=[[0.7, 0.3], [0.4, 0.6]],
                initial=1,
            ),
            3,
        ),
    ],
)
def test_dp_equals_exhaustive_enumeration(model, L):
    gains = option_gains(PayoffSpec.put(strike=100.0, rate=0.05), L, bound=100.0)
    value, _ = exact_value_and_rule(model, gains)
    assert value == pytest.approx(brute_force_value(model, gains), abs=1e-12)


def test_butterfly_dp_vs_enumeration():
    gains = option_gains(PayoffSpec.butterfly(), 3)
    model = FiniteModel(kind="iid", support=[0.97, 1.0, 1.05], law=[0.25, 0.5, 0.25])
    value, _ = exact_value_and_rule(model, gains)
    assert value == pytest.approx(brute_force_value(model, gains), abs=1e-12)


def test_capacity_errors():
    big = FiniteModel(kind="iid", support=[0.9, 1.0, 1.1], law=[0.3, 0.4, 0.3])
    with pytest.raises(OracleCapacityError):
        exact_continuation(big, zero_gains(20))
    with pytest.raises(OracleCapacityError):
        brute_force_value(big, zero_gains(5), max_rules=1 << 10)


def test_model_validation():
    with pytest.raises(ValueError):
        FiniteModel(kind="iid", support=[0.9, 1.1], law=[0.6, 0.6])
    with pytest.raises(ValueError):
        FiniteModel(kind="iid", support=[-0.9, 1.1], law=[0.5, 0.5])
    with pytest.raises(ValueError):
        FiniteModel(kind="markov", support=[0.9, 1.1], law=[0.5, 0.5])
    with pytest.raises(ValueError):
        TWO_POINT.index_of(0.95)


def test_gap_bound_with_exact_policy_vanishes():
    gains = option_gains(PUT, 2, bound=19.0)
    tables = exact_continuation(TWO_POINT, gains)

    class ExactPolicy:
        def continuation_value(self, j, prefix):
            return tables.continuation(j, prefix)

    res = gap_bound_check(TWO_POINT, gains, ExactPolicy(), 500, seed=5)
    assert res.lhs == pytest.approx(0.0, abs=1e-12)
    assert res.rhs == pytest.approx(0.0, abs=1e-12)
    assert gap_bound_holds(res)


def test_gap_bound_with_zero_policy():
    gains = option_gains(PUT, 2, bound=19.0)

    class ZeroPolicy:
        def continuation_value(self, j, prefix):
            return 0.0

    res = gap_bound_check(TWO_POINT, gains, ZeroPolicy(), 2000, seed=5)
    assert gap_bound_holds(res)
    assert res.rhs > 0


def test_gap_bound_with_fitted_estimator():
    model = FiniteModel(kind="iid", support=[0.95, 1.05], law=[0.5, 0.5])
    gains = option_gains(PayoffSpec.put(strike=100.0, rate=0.0), 2, bound=10.0)
    world = finite_paths(model, 400, 2, 1, seed=8)
    fitted = fit_stopper(world.past_returns, gains, EstimatorConfig())
    res = gap_bound_check(model, gains, fitted, 1500, seed=8)
    assert gap_bound_holds(res)
