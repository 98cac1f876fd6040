"""Comparator policies: two trivial rules and a regression-based one.

The regression comparator fits polynomial least-squares approximations of the
continuation values by backward value iteration on simulated training paths,
using the full hidden state (price, volatility, innovation) that a real
application never observes. It stands in for the theoretical optimum at
benchmark time.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .core import GainSpec, gain_eval, gain_eval_batch
from .simulate import Continuations
from .stopping import StopDecision, first_crossing

__all__ = ["LsmConfig", "LsmPolicy", "baseline_stop", "lsm_fit", "lsm_stop"]

_FIRST_POSITIVE_THRESHOLD = float(np.nextafter(0.0, 1.0))  # g > 0 iff g >= this


def baseline_stop(kind: str, gains: GainSpec, eval_path) -> StopDecision:
    """``first-positive`` stops at the first strictly positive gain,
    ``at-expiry`` always waits until the horizon."""
    horizon = np.asarray(eval_path, dtype=np.float64)
    if kind == "first-positive":
        qfun = lambda j, prefix: _FIRST_POSITIVE_THRESHOLD
    elif kind == "at-expiry":
        qfun = lambda j, prefix: np.inf
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    return first_crossing(gains, qfun, horizon)


@dataclass(frozen=True)
class LsmConfig:
    degree: int = 2
    num_train_paths: int = 1000
    ridge: float = 1e-8

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.num_train_paths < basis_dimension(self.degree):
            raise ValueError(
                f"need at least {basis_dimension(self.degree)} training paths "
                f"for degree {self.degree}"
            )


def basis_dimension(degree: int, num_features: int = 3) -> int:
    return sum(
        1
        for total in range(degree + 1)
        for _ in combinations_with_replacement(range(num_features), total)
    )


def _design(features: np.ndarray, degree: int) -> np.ndarray:
    """Monomials of total degree <= degree over the feature columns."""
    n, f = features.shape
    cols = [np.ones(n)]
    for total in range(1, degree + 1):
        for combo in combinations_with_replacement(range(f), total):
            cols.append(np.prod(features[:, combo], axis=1))
    return np.stack(cols, axis=1)


@dataclass
class LsmPolicy:
    """Per-epoch standardization moments and regression coefficients."""

    gains: GainSpec
    config: LsmConfig
    centers: np.ndarray  # (L, features)
    scales: np.ndarray
    coefs: np.ndarray    # (L, basis)

    def continuation(self, epoch: int, state: np.ndarray) -> np.ndarray:
        """Clipped continuation estimate at epoch for (N, 3) state rows."""
        state = np.atleast_2d(np.asarray(state, dtype=np.float64))
        std = (state - self.centers[epoch]) / self.scales[epoch]
        raw = _design(std, self.config.degree) @ self.coefs[epoch]
        return np.clip(raw, 0.0, self.gains.bound)


def _states(paths: Continuations, epoch: int) -> np.ndarray:
    return np.stack(
        [paths.prices[:, epoch], paths.sigmas[:, epoch], paths.epsilons[:, epoch]], axis=1
    )


def fit_epoch_regression(states: np.ndarray, values: np.ndarray, config: LsmConfig):
    """Ridge polynomial least squares of values on standardized states.

    The intercept is left unpenalized, which keeps constants exactly
    recoverable on degenerate (deterministic) models. Returns
    (center, scale, coefficients).
    """
    center = states.mean(axis=0)
    sd = states.std(axis=0)
    scale = np.where(sd > 1e-12, sd, 1.0)
    design = _design((states - center) / scale, config.degree)
    gram = design.T @ design
    reg = np.full(design.shape[1], config.ridge)
    reg[0] = 0.0
    coef = np.linalg.solve(gram + np.diag(reg), design.T @ values)
    return center, scale, coef


def lsm_fit(config: LsmConfig, gains: GainSpec, train_paths: Continuations) -> LsmPolicy:
    """Backward value iteration with polynomial least squares on (X, sigma, eps).

    Values and gains are already discounted to time 0, so no extra discount
    factors appear.
    """
    L = gains.horizon
    if train_paths.prices.shape[1] != L + 1:
        raise ValueError(f"training paths must have {L + 1} epochs")
    if train_paths.num_paths < config.num_train_paths:
        raise ValueError(
            f"simulator delivered {train_paths.num_paths} paths, "
            f"config asks for {config.num_train_paths}"
        )
    rets = train_paths.returns
    values = gain_eval_batch(gains, L, rets)  # stop value at the horizon
    dim = basis_dimension(config.degree)
    centers = np.zeros((L, 3))
    scales = np.ones((L, 3))
    coefs = np.zeros((L, dim))
    policy = LsmPolicy(gains=gains, config=config, centers=centers, scales=scales, coefs=coefs)
    for j in range(L - 1, -1, -1):
        states = _states(train_paths, j)
        centers[j], scales[j], coefs[j] = fit_epoch_regression(states, values, config)
        cont = policy.continuation(j, states)
        exercise = gain_eval_batch(gains, j, rets[:, :j])
        values = np.maximum(exercise, cont)
    return policy


def lsm_stop(policy: LsmPolicy, eval_paths: Continuations, path_index: int) -> StopDecision:
    """Stop at the first epoch whose gain reaches the predicted continuation."""

    def qfun(j, prefix):
        state = _states(eval_paths, j)[path_index]
        return float(policy.continuation(j, state)[0])

    return first_crossing(policy.gains, qfun, eval_paths.returns[path_index])
