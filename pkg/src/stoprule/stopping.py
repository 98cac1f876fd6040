"""Turning continuation-value estimates into stopping decisions.

The rule is: stop at the first epoch j where the gain g_j is at least the
continuation value for j (ties stop). The continuation value at the final
epoch is 0 by construction and gains are nonnegative, so the rule always
terminates at tau <= L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GainSpec, ReturnPath, gain_eval

__all__ = ["StopDecision", "first_crossing", "decide_stop", "decide_stop_batch", "realized_gain"]


@dataclass(frozen=True)
class StopDecision:
    """Chosen epoch, realized gain, and the (gain, continuation) pairs that
    were examined up to and including the stop."""

    tau: int
    gain: float
    trace: tuple

    def __post_init__(self):
        g, q = self.trace[-1]
        if g < q:
            raise ValueError("decision trace does not end at a crossing")


def first_crossing(gains: GainSpec, qfun, horizon_returns) -> StopDecision:
    """Walk epochs 0..L and stop at the first g_j >= q_j.

    ``qfun(j, prefix)`` supplies the continuation value for epochs j < L;
    epoch L uses the defining convention q_L = 0.
    """
    horizon = np.asarray(horizon_returns, dtype=np.float64)
    L = gains.horizon
    if horizon.size != L:
        raise ValueError(f"horizon must supply exactly {L} returns, got {horizon.size}")
    trace = []
    for j in range(L + 1):
        prefix = horizon[:j]
        g = gain_eval(gains, j, prefix)
        q = 0.0 if j == L else float(qfun(j, prefix))
        trace.append((g, q))
        if g >= q:
            return StopDecision(tau=j, gain=g, trace=tuple(trace))
    raise AssertionError("unreachable: q_L = 0 and g_L >= 0 force a stop")


def _check_shared_past(fitted, eval_path: ReturnPath) -> None:
    past = eval_path.past
    overlap = min(past.size, fitted.train.size)
    if overlap and not np.array_equal(past[-overlap:], fitted.train[-overlap:]):
        raise ValueError("evaluation path does not share the fitted training past")


def decide_stop(fitted, eval_path: ReturnPath) -> StopDecision:
    """Apply the fitted stopper's rule along one evaluation path."""
    from .estimator import continuation_value

    L = fitted.gains.horizon
    if eval_path.horizon.size != L:
        raise ValueError(
            f"evaluation path must carry exactly {L} horizon returns, "
            f"got {eval_path.horizon.size}"
        )
    _check_shared_past(fitted, eval_path)
    return first_crossing(
        fitted.gains,
        lambda j, prefix: continuation_value(fitted, j, prefix),
        eval_path.horizon,
    )


def decide_stop_batch(fitted, horizon_matrix) -> list[StopDecision]:
    """Decide on many continuations of the fitted past.

    Continuation values are pure functions of (stage, horizon prefix), so
    repeated prefixes across paths are evaluated once.
    """
    from .estimator import continuation_value

    horizons = np.asarray(horizon_matrix, dtype=np.float64)
    if horizons.ndim != 2 or horizons.shape[1] != fitted.gains.horizon:
        raise ValueError(
            f"expected a (paths, {fitted.gains.horizon}) horizon matrix, got {horizons.shape}"
        )
    cache: dict = {}

    def qfun(j, prefix):
        key = (j, prefix.tobytes())
        if key not in cache:
            cache[key] = continuation_value(fitted, j, prefix)
        return cache[key]

    return [first_crossing(fitted.gains, qfun, row) for row in horizons]


def realized_gain(gains: GainSpec, tau: int, eval_path: ReturnPath) -> float:
    """Gain collected when stopping at epoch tau along the given path."""
    if not 0 <= tau <= gains.horizon:
        raise ValueError(f"tau {tau} outside [0, {gains.horizon}]")
    return gain_eval(gains, tau, eval_path.horizon[:tau])
