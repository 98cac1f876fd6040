"""Exact dynamic programming on small finite-support return models.

Continuation values solve the backward recursion
    q_t(history) = E[ max(g_{t+1}, q_{t+1}) | history ],   q_L = 0,
value functions are V_t = max(g_t, q_t), and the optimal rule stops at the
first epoch with g_t >= q_t. States are full horizon histories (tuples of
support indices), which stays exact and collision-free at desk scale.

``brute_force_value`` re-derives the optimal value by enumerating every
adapted stopping rule, providing an independent check of the recursion.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import GainSpec, gain_eval
from .simulate import substream, uniforms
from .stopping import StopDecision, first_crossing

__all__ = [
    "FiniteModel",
    "OracleTables",
    "OracleCapacityError",
    "exact_continuation",
    "exact_value_and_rule",
    "brute_force_value",
    "Lemma51Result",
    "gap_bound_check",
    "gap_bound_holds",
]


class OracleCapacityError(RuntimeError):
    """Raised when the discrete state space exceeds the configured cap."""


@dataclass(frozen=True)
class FiniteModel:
    """Finite-support return law.

    ``iid``: law is a probability vector over support values.
    ``markov``: law is a row-stochastic matrix; the next return is drawn
    conditionally on the previous one, and ``initial`` is the support index
    of the return observed at the decision time.
    """

    kind: str
    support: np.ndarray
    law: np.ndarray
    initial: int = 0

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64)
        law = np.asarray(self.law, dtype=np.float64)
        if self.kind not in ("iid", "markov"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if support.ndim != 1 or support.size == 0 or np.any(support <= 0):
            raise ValueError("support must be a nonempty vector of positive returns")
        if self.kind == "iid":
            if law.shape != support.shape:
                raise ValueError("iid law must match the support length")
            rows = law[None, :]
        else:
            if law.shape != (support.size, support.size):
                raise ValueError("markov law must be a square matrix over the support")
            rows = law
        if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("law rows must be probability vectors (sum 1 within 1e-12)")
        if not 0 <= self.initial < support.size:
            raise ValueError("initial index outside the support")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "law", law)

    def transition(self, prev_index: int | None) -> np.ndarray:
        if self.kind == "iid":
            return self.law
        idx = self.initial if prev_index is None else prev_index
        return self.law[idx]

    def index_of(self, value: float) -> int:
        diffs = np.abs(self.support - value)
        idx = int(np.argmin(diffs))
        if diffs[idx] > 1e-9:
            raise ValueError(f"return {value} is not on the model support")
        return idx


@dataclass(frozen=True)
class OracleTables:
    """Per-epoch continuation values and value functions keyed by the history
    of horizon support indices (the empty tuple is the time-0 state)."""

    model: FiniteModel
    gains: GainSpec
    q: tuple  # q[t] is a dict: history tuple -> continuation value
    v: tuple  # v[t] likewise for the value function

    @property
    def value(self) -> float:
        return self.v[0][()]

    def continuation(self, t: int, history_returns) -> float:
        hist = tuple(self.model.index_of(z) for z in np.atleast_1d(history_returns)[:t])
        return self.q[t][hist]

    def rule_decision(self, horizon_returns) -> StopDecision:
        """Stop at the first epoch with g_t >= q_t (the optimal rule)."""
        horizon = np.asarray(horizon_returns, dtype=np.float64)

        def qfun(t, prefix):
            return self.continuation(t, prefix)

        return first_crossing(self.gains, qfun, horizon)


def _histories(num_states: int, t: int):
    return itertools.product(range(num_states), repeat=t)


def exact_continuation(
    model: FiniteModel, gains: GainSpec, max_states: int = 1 << 20
) -> OracleTables:
    """Backward induction over the full history tree, exact summation."""
    L = gains.horizon
    S = model.support.size
    total = sum(S**t for t in range(L + 1))
    if total > max_states:
        raise OracleCapacityError(
            f"{total} histories exceed the cap of {max_states}; shrink the model"
        )
    q: list[dict] = [dict() for _ in range(L + 1)]
    v: list[dict] = [dict() for _ in range(L + 1)]
    for hist in _histories(S, L):
        q[L][hist] = 0.0
        v[L][hist] = gain_eval(gains, L, model.support[list(hist)])
    for t in range(L - 1, -1, -1):
        for hist in _histories(S, t):
            probs = model.transition(hist[-1] if hist else None)
            acc = 0.0
            for s in range(S):
                child = hist + (s,)
                g_next = gain_eval(gains, t + 1, model.support[list(child)])
                acc += probs[s] * max(g_next, q[t + 1][child])
            q[t][hist] = acc
            g_here = gain_eval(gains, t, model.support[list(hist)])
            v[t][hist] = max(g_here, acc)
    return OracleTables(model=model, gains=gains, q=tuple(q), v=tuple(v))


def exact_value_and_rule(model: FiniteModel, gains: GainSpec, max_states: int = 1 << 20):
    """Optimal value max(g_0, q_0) together with the threshold tables."""
    tables = exact_continuation(model, gains, max_states=max_states)
    return tables.value, tables


def brute_force_value(model: FiniteModel, gains: GainSpec, max_rules: int = 1 << 20) -> float:
    """Maximum expected gain over ALL adapted stopping rules, by enumeration.

    A rule assigns stop/continue to every history node at epochs 0..L-1
    (epoch L always stops). Deliberately independent of the recursion above.
    """
    L = gains.horizon
    S = model.support.size
    nodes = []  # (epoch, history) in a fixed order
    for t in range(L):
        nodes.extend((t, h) for h in _histories(S, t))
    if 2 ** len(nodes) > max_rules:
        raise OracleCapacityError(
            f"2^{len(nodes)} candidate rules exceed the cap of {max_rules}"
        )
    paths = []
    for hist in _histories(S, L):
        prob = 1.0
        prev = None
        for s in hist:
            prob *= model.transition(prev)[s]
            prev = s
        paths.append((hist, prob))
    node_pos = {node: i for i, node in enumerate(nodes)}
    best = -math.inf
    for bits in range(2 ** len(nodes)):
        expected = 0.0
        for hist, prob in paths:
            tau = L
            for t in range(L):
                if bits >> node_pos[(t, hist[:t])] & 1:
                    tau = t
                    break
            expected += prob * gain_eval(gains, tau, model.support[list(hist[:tau])])
        best = max(best, expected)
    return best


@dataclass(frozen=True)
class Lemma51Result:
    """Monte Carlo estimates of the policy-gap bound: the value lost by
    stopping with estimated continuation values is at most the summed mean
    absolute estimation error over stages."""

    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    num_paths: int

    @property
    def se_combined(self) -> float:
        return math.hypot(self.se_lhs, self.se_rhs)


def _policy_qfun(fitted):
    """Continuation values of a fitted stopper, or of anything exposing a
    ``continuation_value(stage, horizon_prefix)`` method (e.g. the exact
    tables wrapped for the substitution tests)."""
    if hasattr(fitted, "stages"):
        from .estimator import continuation_value

        return lambda j, prefix: continuation_value(fitted, j, prefix)
    method = getattr(fitted, "continuation_value", None)
    if callable(method):
        return lambda j, prefix: method(j, prefix)
    raise TypeError("need a FittedStopper or an object with continuation_value()")


def gap_bound_check(
    model: FiniteModel,
    gains: GainSpec,
    fitted,
    num_paths: int,
    seed: int,
) -> Lemma51Result:
    """Estimate both sides of the policy-gap inequality on fresh paths.

    lhs = E[g at the exact rule] - E[g at the fitted rule];
    rhs = sum over stages j < L of E|qhat_j - q_j| along the same paths.
    """
    tables = exact_continuation(model, gains)
    qfun = _policy_qfun(fitted)
    L = gains.horizon
    gen = substream(seed, 17)
    if model.kind == "iid":
        cum = np.cumsum(model.law)
        idx = np.searchsorted(cum, uniforms(gen, (num_paths, L)), side="right")
    else:
        cum_rows = np.cumsum(model.law, axis=1)
        idx = np.empty((num_paths, L), dtype=np.int64)
        start = model.index_of(fitted.train[-1]) if hasattr(fitted, "train") else model.initial
        cur = np.full(num_paths, start, dtype=np.int64)
        u = uniforms(gen, (num_paths, L))
        for t in range(L):
            nxt = np.empty_like(cur)
            for s in range(model.support.size):
                m = cur == s
                if np.any(m):
                    nxt[m] = np.searchsorted(cum_rows[s], u[m, t], side="right")
            cur = nxt
            idx[:, t] = cur
    paths = model.support[idx]

    diffs = np.empty(num_paths)
    gap_sums = np.empty(num_paths)
    qhat_cache: dict = {}

    def cached_q(j, prefix):
        key = (j, prefix.tobytes())
        if key not in qhat_cache:
            qhat_cache[key] = qfun(j, prefix)
        return qhat_cache[key]

    for p in range(num_paths):
        row = paths[p]
        exact_dec = tables.rule_decision(row)
        fitted_dec = first_crossing(gains, cached_q, row)
        diffs[p] = exact_dec.gain - fitted_dec.gain
        acc = 0.0
        for j in range(L):
            acc += abs(cached_q(j, row[:j]) - tables.continuation(j, row[:j]))
        gap_sums[p] = acc
    lhs = float(diffs.mean())
    rhs = float(gap_sums.mean())
    se_lhs = float(diffs.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    se_rhs = float(gap_sums.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    return Lemma51Result(lhs=lhs, rhs=rhs, se_lhs=se_lhs, se_rhs=se_rhs, num_paths=num_paths)


def gap_bound_holds(result: Lemma51Result, num_se: float = 3.0) -> bool:
    """Assertion utility: lhs <= rhs + num_se * combined standard error."""
    return result.lhs <= result.rhs + num_se * result.se_combined
