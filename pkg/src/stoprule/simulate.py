"""Data generators: a GARCH(1,1) price world and finite-support return laws.

Randomness contract
-------------------
All draws come from numpy's Philox4x64-10 counter-based generator. Substreams
are derived from a 128-bit key built as ``key = [seed, stream]`` where the
stream word hashes a tuple of small integers (purpose, repetition, ...), so
any piece of a benchmark can be regenerated independently and the same seed
always produces bit-identical output. Uniforms are 53-bit,
``u = (i + 0.5) / 2^53`` (strictly inside (0, 1)); standard normals are
obtained by inversion, ``ndtri(u)``.

Price recursion (one step per epoch, quarter-year epochs):
    X_{i+1} = X_i * exp(r*/4 - sigma_{i+1}^2 / 2 + sigma_{i+1} * eps_{i+1})
    sigma_{i+1}^2 = delta0 + delta1 * (sigma_i*eps_i - lam*sigma_i)^2 + xi1 * sigma_i^2

The variance recursion starts at ``sigma_init`` a full ``burn_in`` steps
before the decision time; the training window is the most recent ``past_len``
returns of that stretch. Evaluation continuations branch at time 0 and share
the terminal (sigma, eps) state, so the volatility state carries over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "GarchParams",
    "GarchPast",
    "Continuations",
    "GarchWorld",
    "FiniteWorld",
    "substream",
    "normals",
    "uniforms",
    "garch_step",
    "garch_paths",
    "garch_continuations",
    "finite_paths",
    "write_returns",
]

# substream purpose tags (documented so runs can be dissected)
STREAM_PAST = 1
STREAM_EVAL = 2
STREAM_AUX = 3

_MIX = 0x9E3779B97F4A7C15  # odd 64-bit constant for stream hashing
_MASK64 = (1 << 64) - 1


def substream(seed: int, *ids: int) -> np.random.Generator:
    """Philox generator keyed by (seed, hash of the id tuple)."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    word = 0
    for i, v in enumerate(ids):
        if v < 0:
            raise ValueError("stream ids must be nonnegative")
        word = (word * _MIX + v + 1 + i) & _MASK64
    key = np.array([np.uint64(seed & _MASK64), np.uint64(word)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    """53-bit uniforms strictly inside (0, 1)."""
    ints = gen.integers(0, 1 << 53, size=shape, dtype=np.int64)
    return (ints.astype(np.float64) + 0.5) / float(1 << 53)


def normals(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by inverse-CDF applied to the uniform stream."""
    return ndtri(uniforms(gen, shape))


@dataclass(frozen=True)
class GarchParams:
    r_star: float = 0.05
    lam: float = 0.7136
    delta0: float = 0.0000664
    delta1: float = 0.144
    xi1: float = 0.776
    burn_in: int = 1600
    x0: float = 100.0
    sigma_init: float = 0.0  # variance at time -burn_in

    def __post_init__(self):
        if self.delta0 < 0 or self.delta1 < 0 or self.xi1 < 0:
            raise ValueError("variance recursion coefficients must be nonnegative")
        if self.delta1 + self.xi1 >= 1.0:
            raise ValueError("need delta1 + xi1 < 1 for a stable variance recursion")
        if self.burn_in < 1:
            raise ValueError("burn_in must be positive")
        if self.x0 <= 0:
            raise ValueError("x0 must be positive")
        if self.sigma_init < 0:
            raise ValueError("sigma_init is a variance and must be nonnegative")


def garch_step(params: GarchParams, sigma2: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Next conditional variance given current variance and innovation."""
    sigma = np.sqrt(sigma2)
    shock = sigma * eps - params.lam * sigma
    return params.delta0 + params.delta1 * np.square(shock) + params.xi1 * sigma2


def _step_return(params: GarchParams, sigma2_next, eps_next) -> np.ndarray:
    drift = params.r_star * 0.25
    return np.exp(drift - 0.5 * sigma2_next + np.sqrt(sigma2_next) * eps_next)


@dataclass(frozen=True)
class GarchPast:
    """Shared history ending at the decision time: prices X_{-n}..X_0 with
    X_0 = x0 exactly, plus the terminal volatility state."""

    prices: np.ndarray  # length past_len + 1
    sigma2_0: float
    eps_0: float

    @property
    def returns(self) -> np.ndarray:
        return self.prices[1:] / self.prices[:-1]


@dataclass(frozen=True)
class Continuations:
    """Paths branching at time 0; arrays are (num_paths, horizon + 1) with
    column t holding the state at epoch t (column 0 is the shared state)."""

    prices: np.ndarray
    sigmas: np.ndarray  # sigma_t (standard deviation, not variance)
    epsilons: np.ndarray

    @property
    def returns(self) -> np.ndarray:
        return self.prices[:, 1:] / self.prices[:, :-1]

    @property
    def num_paths(self) -> int:
        return int(self.prices.shape[0])


@dataclass(frozen=True)
class GarchWorld:
    params: GarchParams
    past: GarchPast
    eval_paths: Continuations


def garch_past_from_innovations(params: GarchParams, eps: np.ndarray, past_len: int) -> GarchPast:
    """Roll the recursion from sigma_init through given innovations.

    ``eps`` supplies eps_{-burn_in}..eps_0 (burn_in + 1 values); the returned
    past keeps the most recent ``past_len`` returns.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.size != params.burn_in + 1:
        raise ValueError(f"need {params.burn_in + 1} innovations, got {eps.size}")
    if not 1 <= past_len <= params.burn_in:
        raise ValueError(f"past_len must lie in [1, burn_in={params.burn_in}]")
    sigma2 = np.empty(params.burn_in + 1)
    sigma2[0] = params.sigma_init
    for i in range(params.burn_in):
        sigma2[i + 1] = garch_step(params, sigma2[i], eps[i])
    rets = _step_return(params, sigma2[1:], eps[1:])  # returns Z_{-burn_in+1}..Z_0
    kept = rets[-past_len:]
    prices = np.empty(past_len + 1)
    prices[-1] = params.x0
    # build the history backwards so X_0 is exact
    prices[:-1] = params.x0 / np.cumprod(kept[::-1])[::-1]
    return GarchPast(prices=prices, sigma2_0=float(sigma2[-1]), eps_0=float(eps[-1]))


def garch_continuations(
    params: GarchParams,
    past: GarchPast,
    horizon: int,
    num_paths: int,
    gen: np.random.Generator,
) -> Continuations:
    """Branch ``num_paths`` futures of length ``horizon`` off the shared state."""
    if horizon < 0 or num_paths < 1:
        raise ValueError("horizon must be >= 0 and num_paths >= 1")
    eps = np.empty((num_paths, horizon + 1))
    eps[:, 0] = past.eps_0
    eps[:, 1:] = normals(gen, (num_paths, horizon))
    sigma2 = np.empty((num_paths, horizon + 1))
    sigma2[:, 0] = past.sigma2_0
    prices = np.empty((num_paths, horizon + 1))
    prices[:, 0] = params.x0
    for t in range(horizon):
        sigma2[:, t + 1] = garch_step(params, sigma2[:, t], eps[:, t])
        prices[:, t + 1] = prices[:, t] * _step_return(params, sigma2[:, t + 1], eps[:, t + 1])
    return Continuations(prices=prices, sigmas=np.sqrt(sigma2), epsilons=eps)


def garch_paths(
    params: GarchParams, past_len: int, horizon: int, num_eval_paths: int, seed: int
) -> GarchWorld:
    """Shared training past plus evaluation continuations, fully seeded."""
    gen_past = substream(seed, STREAM_PAST)
    eps = normals(gen_past, params.burn_in + 1)
    past = garch_past_from_innovations(params, eps, past_len)
    gen_eval = substream(seed, STREAM_EVAL)
    evals = garch_continuations(params, past, horizon, num_eval_paths, gen_eval)
    return GarchWorld(params=params, past=past, eval_paths=evals)


@dataclass(frozen=True)
class FiniteWorld:
    past_returns: np.ndarray
    eval_returns: np.ndarray  # (num_paths, horizon)
    last_index: int  # support index of the final training return


def _sample_iid(support, law_cum, gen, shape):
    u = uniforms(gen, shape)
    idx = np.searchsorted(law_cum, u, side="right")
    return idx


def finite_paths(
    model, past_len: int, horizon: int, num_eval_paths: int, seed: int, rep: int = 0
) -> FiniteWorld:
    """Draws from a finite-support return law, mirroring the GARCH layout:
    one shared past, independent continuations conditioned on the final state.
    ``rep`` selects an independent substream for repeated experiments.
    """
    support = np.asarray(model.support, dtype=np.float64)
    gen_past = substream(seed, STREAM_PAST, rep)
    gen_eval = substream(seed, STREAM_EVAL, rep)
    if model.kind == "iid":
        cum = np.cumsum(model.law)
        past_idx = _sample_iid(support, cum, gen_past, past_len)
        eval_idx = _sample_iid(support, cum, gen_eval, (num_eval_paths, horizon))
        last = int(past_idx[-1]) if past_len else int(model.initial)
    else:
        cum_rows = np.cumsum(model.law, axis=1)
        past_idx = np.empty(past_len, dtype=np.int64)
        state = int(model.initial)
        u_past = uniforms(gen_past, past_len)
        for t in range(past_len):
            state = int(np.searchsorted(cum_rows[state], u_past[t], side="right"))
            past_idx[t] = state
        last = state
        eval_idx = np.empty((num_eval_paths, horizon), dtype=np.int64)
        u_eval = uniforms(gen_eval, (num_eval_paths, horizon))
        cur = np.full(num_eval_paths, last, dtype=np.int64)
        for t in range(horizon):
            nxt = np.empty_like(cur)
            for s in range(support.size):
                mask = cur == s
                if np.any(mask):
                    nxt[mask] = np.searchsorted(cum_rows[s], u_eval[mask, t], side="right")
            cur = nxt
            eval_idx[:, t] = cur
    return FiniteWorld(
        past_returns=support[past_idx],
        eval_returns=support[eval_idx],
        last_index=last,
    )


def write_returns(path, returns) -> None:
    """Emit a return series as plain text, one positive decimal per line,
    oldest first (shortest representation that round-trips exactly)."""
    arr = np.asarray(returns, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        for x in arr:
            fh.write(repr(float(x)))
            fh.write("\n")
