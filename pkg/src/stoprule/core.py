"""Domain types: return paths, payoff functions and discounted gain sequences.

A return path splits at an origin index into past observations (used for
fitting) and a decision horizon. Gains are the discounted option payoffs
earned when stopping at a given epoch; they are nonnegative and bounded,
which the aggregation machinery relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ReturnPath",
    "PayoffSpec",
    "GainSpec",
    "payoff_eval",
    "payoff_bound",
    "gain_eval",
    "returns_from_prices",
    "returns_to_prices",
    "option_gains",
]


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ReturnPath:
    """A sequence of positive returns with an origin separating past from horizon.

    ``values[:origin]`` are past observations (oldest first, ending at the
    decision time), ``values[origin:]`` are the decision-horizon returns.
    """

    values: np.ndarray
    origin: int

    def __post_init__(self):
        arr = _as_float_array(self.values, "values")
        if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
            raise ValueError("all returns must be finite and strictly positive")
        if not 0 <= self.origin <= arr.size:
            raise ValueError(f"origin {self.origin} outside [0, {arr.size}]")
        object.__setattr__(self, "values", arr)

    @property
    def past(self) -> np.ndarray:
        return self.values[: self.origin]

    @property
    def horizon(self) -> np.ndarray:
        return self.values[self.origin:]

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff function of the underlying price, plus discounting conventions.

    kinds:
      * ``butterfly``: parameters (left, right); f(x) = max(0, min(x-left, right-x))
      * ``put``: parameters (strike,); f(x) = max(strike - x, 0)
      * ``custom-table``: parameters (xs, ys); piecewise-linear through the
        knots, constant beyond the first/last knot (keeps it bounded)

    ``rate`` is the riskless rate per year, ``step`` the year-fraction of one
    epoch, ``anchor_price`` the renormalized price at the decision time.
    """

    kind: str
    parameters: tuple = ()
    rate: float = 0.05
    step: float = 0.25
    anchor_price: float = 100.0

    def __post_init__(self):
        if self.kind not in ("butterfly", "put", "custom-table"):
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.anchor_price <= 0:
            raise ValueError("anchor_price must be positive")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.kind == "butterfly":
            left, right = self.parameters
            if not left < right:
                raise ValueError("butterfly needs left strike < right strike")
        elif self.kind == "put":
            (strike,) = self.parameters
            if strike <= 0:
                raise ValueError("put strike must be positive")
        else:
            xs, ys = self.parameters
            xs = tuple(float(x) for x in xs)
            ys = tuple(float(y) for y in ys)
            if len(xs) != len(ys) or len(xs) < 2:
                raise ValueError("custom-table needs matching xs/ys with >= 2 knots")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("custom-table knots must be strictly increasing")
            if any(y < 0 or not math.isfinite(y) for y in ys):
                raise ValueError("custom-table payoffs must be finite and nonnegative")
            object.__setattr__(self, "parameters", (xs, ys))

    @classmethod
    def butterfly(cls, left: float = 99.0, right: float = 107.0, **kw) -> "PayoffSpec":
        return cls(kind="butterfly", parameters=(left, right), **kw)

    @classmethod
    def put(cls, strike: float = 100.0, **kw) -> "PayoffSpec":
        return cls(kind="put", parameters=(strike,), **kw)


def payoff_bound(spec: PayoffSpec) -> float:
    """Analytic maximum of the payoff over positive prices."""
    if spec.kind == "butterfly":
        left, right = spec.parameters
        return (right - left) / 2.0
    if spec.kind == "put":
        (strike,) = spec.parameters
        return float(strike)
    xs, ys = spec.parameters
    return float(max(ys))


def _payoff_array(spec: PayoffSpec, prices: np.ndarray) -> np.ndarray:
    if spec.kind == "butterfly":
        left, right = spec.parameters
        return np.maximum(0.0, np.minimum(prices - left, right - prices))
    if spec.kind == "put":
        (strike,) = spec.parameters
        return np.maximum(strike - prices, 0.0)
    xs, ys = spec.parameters
    return np.interp(prices, xs, ys)


def payoff_eval(spec: PayoffSpec, price: float) -> float:
    """Evaluate the payoff at a single positive price."""
    price = float(price)
    if not math.isfinite(price):
        raise ValueError(f"price must be finite, got {price}")
    if price <= 0:
        raise ValueError(f"price must be positive, got {price}")
    return float(_payoff_array(spec, np.asarray([price]))[0])


@dataclass(frozen=True)
class GainSpec:
    """Horizon, bound and the family of gain functions g_0..g_L.

    ``gains[j]`` maps the first j horizon returns (a length-j array) to the
    reward for stopping at epoch j; g_0 is constant. Every gain value must
    lie in [0, bound]. ``batch`` optionally holds vectorized versions taking
    an (N, j) matrix of return prefixes, used to speed up fitting.
    """

    horizon: int
    bound: float
    gains: tuple
    batch: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if not (self.bound > 0 and math.isfinite(self.bound)):
            raise ValueError("bound must be a positive finite real")
        if len(self.gains) != self.horizon + 1:
            raise ValueError(
                f"need {self.horizon + 1} gain functions for horizon {self.horizon}, "
                f"got {len(self.gains)}"
            )


def gain_eval(gains: GainSpec, j: int, returns_prefix) -> float:
    """Gain for stopping at epoch j given the first j horizon returns."""
    if not 0 <= j <= gains.horizon:
        raise ValueError(f"epoch {j} outside [0, {gains.horizon}]")
    prefix = _as_float_array(returns_prefix, "returns_prefix")
    if prefix.size != j:
        raise ValueError(f"epoch {j} needs a prefix of length {j}, got {prefix.size}")
    value = float(gains.gains[j](prefix))
    if not (0.0 <= value <= gains.bound):
        raise ValueError(
            f"gain {value} at epoch {j} violates the [0, {gains.bound}] bound"
        )
    return value


def gain_eval_batch(gains: GainSpec, j: int, prefixes: np.ndarray) -> np.ndarray:
    """Vectorized gains over an (N, j) matrix of return prefixes."""
    prefixes = np.asarray(prefixes, dtype=np.float64)
    if prefixes.ndim != 2 or prefixes.shape[1] != j:
        raise ValueError(f"expected an (N, {j}) prefix matrix, got {prefixes.shape}")
    if gains.batch is not None:
        values = np.asarray(gains.batch[j](prefixes), dtype=np.float64)
    else:
        values = np.asarray([gains.gains[j](row) for row in prefixes], dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > gains.bound):
        raise ValueError(f"gains at epoch {j} violate the [0, {gains.bound}] bound")
    return values


def option_gains(payoff: PayoffSpec, horizon: int, bound: float | None = None) -> GainSpec:
    """Discounted option gains: g_j = e^(-rate*step*j) * f(anchor * prod(returns)).

    g_0 is the constant f(anchor_price); the bound defaults to the
    undiscounted payoff maximum. Pass a tighter ``bound`` when the return law
    cannot reach the payoff's global maximum (every gain evaluation still
    checks it); the bound feeds the default aggregation temperature 8 * B^2.
    """
    bound = payoff_bound(payoff) if bound is None else float(bound)

    def make(j: int):
        disc = math.exp(-payoff.rate * payoff.step * j)

        def g(prefix, _disc=disc, _j=j):
            prefix = np.asarray(prefix, dtype=np.float64)
            price = payoff.anchor_price * float(np.prod(prefix))
            return _disc * payoff_eval(payoff, price)

        def g_batch(prefixes, _disc=disc, _j=j):
            prices = payoff.anchor_price * np.prod(prefixes, axis=1)
            return _disc * _payoff_array(payoff, prices)

        return g, g_batch

    pairs = [make(j) for j in range(horizon + 1)]
    return GainSpec(
        horizon=horizon,
        bound=bound,
        gains=tuple(p[0] for p in pairs),
        batch=tuple(p[1] for p in pairs),
    )


def returns_from_prices(prices) -> np.ndarray:
    """Per-step returns X_i / X_{i-1} from a positive price series."""
    arr = _as_float_array(prices, "prices")
    if arr.size < 2:
        raise ValueError("need at least two prices")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("prices must be finite and strictly positive")
    return arr[1:] / arr[:-1]


def returns_to_prices(returns, initial: float) -> np.ndarray:
    """Rebuild a price series from returns and the first price."""
    arr = _as_float_array(returns, "returns")
    if initial <= 0:
        raise ValueError("initial price must be positive")
    out = np.empty(arr.size + 1, dtype=np.float64)
    out[0] = initial
    np.cumprod(arr, out=out[1:])
    out[1:] *= initial
    return out
