import numpy as np
import pytest

from stoprule.baselines import (
    LsmConfig,
    LsmPolicy,
    basis_dimension,
    baseline_stop,
    fit_epoch_regression,
    lsm_fit,
    lsm_stop,
)
from stoprule.core import GainSpec, PayoffSpec, option_gains
from stoprule.oracle import FiniteModel, exact_continuation
from stoprule.simulate import Continuations, GarchParams, garch_continuations, garch_paths, substream

BUTTERFLY_GAINS = option_gains(PayoffSpec.butterfly(), 4)


def test_first_positive_stops_at_zero_for_butterfly():
    dec = baseline_stop("first-positive", BUTTERFLY_GAINS, np.array([1.4, 0.6, 1.0, 1.0]))
    assert dec.tau == 0
    assert dec.gain == 1.0


def test_first_positive_with_zero_gains_waits():
    L = 3
    gains = GainSpec(horizon=L, bound=1.0, gains=tuple(lambda p: 0.0 for _ in range(L + 1)))
    dec = baseline_stop("first-positive", gains, np.ones(L))
    assert dec.tau == L
    assert dec.gain == 0.0


def test_at_expiry_always_waits():
    dec = baseline_stop("at-expiry", BUTTERFLY_GAINS, np.array([1.0, 1.0, 1.0, 1.03]))
    assert dec.tau == 4
    with pytest.raises(ValueError):
        baseline_stop("martingale", BUTTERFLY_GAINS, np.ones(4))


def _constant_world(ret: float, num_paths: int, L: int) -> Continuations:
    prices = 100.0 * np.cumprod(np.full((num_paths, L + 1), ret), axis=1) / ret
    sigmas = np.full((num_paths, L + 1), 0.05)
    epsilons = np.zeros((num_paths, L + 1))
    return Continuations(prices=prices, sigmas=sigmas, epsilons=epsilons)


def test_lsm_recovers_exact_values_on_deterministic_model():
    L = 3
    ret = 1.004
    gains = option_gains(PayoffSpec.butterfly(rate=0.0), L)
    world = _constant_world(ret, 50, L)
    policy = lsm_fit(LsmConfig(num_train_paths=50), gains, world)
    model = FiniteModel(kind="iid", support=[ret], law=[1.0])
    tables = exact_continuation(model, gains)
    for j in range(L):
        state = np.array([world.prices[0, j], 0.05, 0.0])
        got = float(policy.continuation(j, state)[0])
        want = tables.q[j][tuple([0] * j)]
        assert got == pytest.approx(want, abs=1e-8)
    # and the policy stops exactly when the exact rule stops
    dec = lsm_stop(policy, world, 0)
    exact_dec = tables.rule_decision(world.returns[0])
    assert dec.tau == exact_dec.tau


def test_lsm_policy_threshold_behaviour():
    L = 4
    dim = basis_dimension(2)
    zero_policy = LsmPolicy(
        gains=BUTTERFLY_GAINS,
        config=LsmConfig(),
        centers=np.zeros((L, 3)),
        scales=np.ones((L, 3)),
        coefs=np.zeros((L, dim)),
    )
    world = _constant_world(1.0, 3, L)
    dec = lsm_stop(zero_policy, world, 0)
    assert dec.tau == 0  # continuation 0 and positive immediate gain
    big = np.zeros((L, dim))
    big[:, 0] = 1e9  # clipped to the bound, still above every interior gain
    wait_policy = LsmPolicy(
        gains=BUTTERFLY_GAINS,
        config=LsmConfig(),
        centers=np.zeros((L, 3)),
        scales=np.ones((L, 3)),
        coefs=big,
    )
    dec = lsm_stop(wait_policy, world, 0)
    assert dec.tau == L


def test_lsm_clips_to_gain_bounds():
    world = _constant_world(1.01, 30, 2)
    gains = option_gains(PayoffSpec.butterfly(), 2)
    policy = lsm_fit(LsmConfig(num_train_paths=30), gains, world)
    crazy_state = np.array([1e6, 1e3, 1e2])
    for j in range(2):
        v = float(policy.continuation(j, crazy_state)[0])
        assert 0.0 <= v <= gains.bound


def test_exact_polynomial_recovery():
    rng = np.random.default_rng(0)
    cfg = LsmConfig(num_train_paths=200)
    states = np.column_stack(
        [rng.uniform(80, 120, 200), rng.uniform(0.01, 0.3, 200), rng.normal(0, 1, 200)]
    )
    std = (states - states.mean(0)) / states.std(0)
    beta = rng.uniform(-1, 1, basis_dimension(cfg.degree))
    from stoprule.baselines import _design

    values = _design(std, cfg.degree) @ beta
    center, scale, coef = fit_epoch_regression(states, values, cfg)
    refit = _design((states - center) / scale, cfg.degree) @ coef
    assert np.max(np.abs(refit - values)) < 1e-6


def test_lsm_config_validation():
    with pytest.raises(ValueError):
        LsmConfig(num_train_paths=5)
    with pytest.raises(ValueError):
        LsmConfig(ridge=-1e-3)
    with pytest.raises(ValueError):
        LsmConfig(degree=-1)


def test_lsm_needs_hidden_state_shape():
    gains = option_gains(PayoffSpec.butterfly(), 4)
    world = _constant_world(1.0, 30, 2)  # horizon mismatch
    with pytest.raises(ValueError):
        lsm_fit(LsmConfig(num_train_paths=30), gains, world)


def test_lsm_beats_holding_on_garch_world():
    params = GarchParams()
    w = garch_paths(params, 300, 4, 400, seed=21)
    train = garch_continuations(params, w.past, 4, 1000, substream(21, 3))
    policy = lsm_fit(LsmConfig(), BUTTERFLY_GAINS, train)
    gains_seen = [lsm_stop(policy, w.eval_paths, i).gain for i in range(400)]
    prices = w.eval_paths.prices[:, -1]
    hold = np.exp(-0.05) * np.maximum(0.0, np.minimum(prices - 99, 107 - prices))
    assert np.mean(gains_seen) > hold.mean()
