"""Continuation-value estimation from a single observed return path.

Construction, per stage j = L-1 down to 0:

* Each expert (lag k, bandwidth h) is a kernel local-averaging regressor.
  At sample size m it averages the stage targets over the training windows
  that fit inside the first m observations, weighting window w by
  K((u - w)/h) where u is the query window (k+1 trailing returns plus the
  j horizon returns) and K(v) = H(||v||_2^(k+j+1)). Empty or fully
  underflowed sums yield exactly 0 (the 0/0 := 0 convention), and so does
  any sample size with no usable window (k >= m-j-1).
* The stage target at training index i is max(gain at the next epoch,
  aggregated stage-(j+1) estimate at sample size i), so stage j+1 must be
  fitted first; the final stage uses the convention that the continuation
  value beyond the horizon is identically 0.
* Experts are mixed by exponential weighting: prior times
  exp(-(cumulative squared one-step-ahead loss)/c) with temperature
  c = 8 * bound^2 by default, normalized. The online predictions feeding
  these losses are memoized during the fit (one kernel sum per (size,
  window) pair), which keeps the whole fit at O(L * experts * n^2).

Sample-size bookkeeping follows the forward (prefix) form of the recursion:
the estimate at sample size m uses the first m training returns, which makes
every table of the full fit the prefix-restriction of the next one and lets
all sample sizes share storage. Two consequences, both deliberate:

* Mixture weights use in-sample residuals only. For stages j >= 1 the
  literal cumulative loss at full sample size would additionally contain up
  to j residuals that depend on the decision-time horizon values; those are
  dropped so that losses are plain per-size scalars of the fit.
* With Cesaro averaging on, the returned estimate is the arithmetic mean
  over sample sizes l = 1..n of the size-l estimator applied at the query.

Window coordinates pass through a convention hook: ``step-relative`` keeps
raw one-step returns, ``interval-anchored`` (default) replaces each window
by its running products, i.e. growth relative to the window start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import GainSpec, ReturnPath, gain_eval_batch
from .kernel import KernelProfile, radial_weights

__all__ = [
    "ExpertGrid",
    "EstimatorConfig",
    "FittedStopper",
    "default_grid",
    "exponential_mixture",
    "fit_stopper",
    "expert_predict",
    "stage_targets",
    "cumulative_loss",
    "mixture_weights",
    "aggregate_predict",
    "cesaro_predict",
    "continuation_value",
    "aggregation_dominance_gap",
    "closed_form_kernel_terms",
]

RETURN_CONVENTIONS = ("step-relative", "interval-anchored")


@dataclass(frozen=True)
class ExpertGrid:
    """Finite set of (lag, bandwidth) experts with strictly positive priors."""

    entries: tuple
    prior: np.ndarray

    def __post_init__(self):
        entries = tuple((int(k), float(h)) for k, h in self.entries)
        prior = np.asarray(self.prior, dtype=np.float64)
        if len(entries) == 0:
            raise ValueError("expert grid must be nonempty")
        if len(set(entries)) != len(entries):
            raise ValueError("expert grid entries must be distinct")
        if any(k < 0 or h <= 0 for k, h in entries):
            raise ValueError("lags must be >= 0 and bandwidths > 0")
        if prior.shape != (len(entries),) or np.any(prior <= 0):
            raise ValueError("need one strictly positive prior per expert")
        if abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1 within 1e-12")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "prior", prior)

    def index_of(self, expert) -> int:
        key = (int(expert[0]), float(expert[1]))
        try:
            return self.entries.index(key)
        except ValueError:
            raise ValueError(f"unknown expert {key}; grid has {self.entries}") from None

    def __len__(self) -> int:
        return len(self.entries)


def default_grid() -> ExpertGrid:
    """Lags {0,1,2} x bandwidths {0.001, 0.01, 0.1}, uniform prior 1/9."""
    entries = tuple((k, h) for k in (0, 1, 2) for h in (0.001, 0.01, 0.1))
    return ExpertGrid(entries=entries, prior=np.full(9, 1.0 / 9.0))


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator knobs.

    ``temperature`` is the aggregation constant c (None -> 8 * bound^2).
    ``skip_scale`` drops the first (L-1-stage) * skip_scale residuals from
    every cumulative loss; early nested estimates rest on too few points to
    be worth scoring. The predictions themselves stay available.
    """

    grid: ExpertGrid = field(default_factory=default_grid)
    profile: KernelProfile = field(default_factory=KernelProfile)
    temperature: float | None = None
    cesaro: bool = False
    skip_scale: int = 0
    return_convention: str = "interval-anchored"

    def __post_init__(self):
        if self.temperature is not None and self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.skip_scale < 0:
            raise ValueError("skip_scale must be nonnegative")
        if self.return_convention not in RETURN_CONVENTIONS:
            raise ValueError(
                f"return_convention must be one of {RETURN_CONVENTIONS}"
            )

    def skip_for_stage(self, stage: int, horizon: int) -> int:
        return max(0, (horizon - 1 - stage)) * self.skip_scale


@dataclass
class _StageTables:
    """Everything the fit stores for one stage."""

    stage: int
    targets: np.ndarray      # per training index i = 1..n-j-1
    online: np.ndarray       # (experts, n-j): prediction at size i, one step ahead
    loss_sums: np.ndarray    # (experts, n-j-1): cumulative squared residuals (skip applied)
    weights: np.ndarray      # (n, experts): mixture weights for every sample size
    agg_online: np.ndarray   # (n-j,): weighted mixture of the online predictions
    windows: dict            # lag -> transformed window matrix, rows i = k+1..n-j
    skip: int


@dataclass
class FittedStopper:
    """Fitted per-stage tables; all prediction entry points are read-only."""

    train: np.ndarray
    gains: GainSpec
    config: EstimatorConfig
    c: float
    stages: list
    kernel_terms: int  # kernel terms consumed building the online tables
    degenerate: bool   # True when no expert ever had a usable window


def _transform(mat: np.ndarray, convention: str) -> np.ndarray:
    if convention == "step-relative":
        return mat
    return np.cumprod(mat, axis=1)


def exponential_mixture(prior: np.ndarray, loss_sums: np.ndarray, c: float) -> np.ndarray:
    """Normalized weights prior * exp(-loss_sum / c) for rows of loss sums.

    The common exponent shift (row minimum) cancels in the normalization, so
    weights stay exact while never underflowing collectively; should every
    weight still vanish, the prior is returned.
    """
    loss_sums = np.atleast_2d(np.asarray(loss_sums, dtype=np.float64))
    shifted = loss_sums - loss_sums.min(axis=1, keepdims=True)
    w = prior[None, :] * np.exp(-shifted / c)
    tot = w.sum(axis=1, keepdims=True)
    return np.where(tot > 0.0, w / np.where(tot > 0.0, tot, 1.0), prior[None, :])


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact broadcasting form; cancellation-free for near-identical windows
    return np.square(a[:, None, :] - b[None, :, :]).sum(axis=2)


_CHUNK = 256


def fit_stopper(train, gains: GainSpec, config: EstimatorConfig | None = None) -> FittedStopper:
    """Fit all stages on the past segment, backward from the horizon."""
    if isinstance(train, ReturnPath):
        z = train.past
    else:
        z = np.asarray(train, dtype=np.float64)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("training data must be a nonempty return vector")
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise ValueError("training returns must be finite and strictly positive")
    config = config or EstimatorConfig()
    c = config.temperature if config.temperature is not None else 8.0 * gains.bound**2
    n = z.size
    L = gains.horizon
    grid = config.grid
    E = len(grid)
    prior = grid.prior
    lags = sorted({k for k, _ in grid.entries})
    by_lag = {k: [(e, h) for e, (kk, h) in enumerate(grid.entries) if kk == k] for k in lags}

    stages: list = [None] * L
    agg_next: np.ndarray | None = None
    kernel_terms = 0
    any_usable = False

    for j in range(L - 1, -1, -1):
        n_on = max(0, n - j)       # online sample sizes i = 1..n_on
        n_t = max(0, n - j - 1)    # training indices with a target
        if n_t > 0:
            gain_windows = sliding_window_view(z, j + 1)[1 : n_t + 1]
            gvals = gain_eval_batch(gains, j + 1, gain_windows)
            targets = gvals if agg_next is None else np.maximum(gvals, agg_next[:n_t])
        else:
            targets = np.zeros(0)

        online = np.zeros((E, n_on))
        windows: dict = {}
        for k in lags:
            dim = k + j + 1
            rows = n - j - k  # window/query rows i = k+1..n-j
            if rows >= 1:
                wmat = _transform(
                    np.ascontiguousarray(sliding_window_view(z, dim)[:rows]),
                    config.return_convention,
                )
            else:
                wmat = np.zeros((0, dim))
            windows[k] = wmat
            n_sum = rows - 1  # windows with targets: i' = k+1..n-j-1
            if n_sum < 1:
                continue
            t_slice = targets[k : k + n_sum]
            # online predictions exist for rows r >= j+1 (size i = r+k+1)
            for r0 in range(j + 1, rows, _CHUNK):
                r1 = min(r0 + _CHUNK, rows)
                cols_needed = r1 - 1 - j  # largest cutoff column + 1 in this chunk
                dchunk = _sq_dists(wmat[r0:r1], wmat[:cols_needed])
                rr = np.arange(r0, r1)
                cut = rr - j - 1  # last usable column per row
                for e, h in by_lag[k]:
                    kw = radial_weights(config.profile, dchunk, dim, h)
                    num = np.cumsum(kw * t_slice[:cols_needed], axis=1)
                    den = np.cumsum(kw, axis=1)
                    nv = num[np.arange(r1 - r0), cut]
                    dv = den[np.arange(r1 - r0), cut]
                    online[e, rr + k] = np.where(dv > 0.0, nv / np.where(dv > 0.0, dv, 1.0), 0.0)
            used = np.arange(j + 1, rows) - j  # usable windows per alive size
            kernel_terms += int(used.sum()) * len(by_lag[k])
            any_usable = True

        skip = min(config.skip_for_stage(j, L), n_t)
        if n_t > 0:
            resid = np.square(online[:, :n_t] - targets)
            resid[:, :skip] = 0.0
            loss_sums = np.cumsum(resid, axis=1)
            idx = np.minimum(np.arange(n) - 1, n_t - 1)  # residual count at size m = row+1
            ls_rows = loss_sums[:, np.clip(idx, 0, None)].T
            ls_rows[idx < 0] = 0.0
        else:
            loss_sums = np.zeros((E, 0))
            ls_rows = np.zeros((n, E))
        weights = exponential_mixture(prior, ls_rows, c)
        agg = (weights[:n_on] * online.T).sum(axis=1)

        stages[j] = _StageTables(
            stage=j,
            targets=targets,
            online=online,
            loss_sums=loss_sums,
            weights=weights,
            agg_online=agg,
            windows=windows,
            skip=skip,
        )
        agg_next = agg

    return FittedStopper(
        train=z,
        gains=gains,
        config=config,
        c=float(c),
        stages=stages,
        kernel_terms=kernel_terms,
        degenerate=not any_usable,
    )


def closed_form_kernel_terms(n: int, horizon: int, grid: ExpertGrid) -> int:
    """Kernel terms the online tables must consume: for each stage and expert,
    the usable-window count summed over alive sample sizes."""
    total = 0
    for j in range(horizon):
        for k, _ in grid.entries:
            m = n - 2 * j - k - 1  # count at the largest fitted size n - j
            if m > 0:
                total += m * (m + 1) // 2
    return total


def _check_stage(fitted: FittedStopper, stage: int) -> _StageTables:
    if not 0 <= stage < fitted.gains.horizon:
        raise ValueError(f"stage {stage} outside [0, {fitted.gains.horizon - 1}]")
    return fitted.stages[stage]


def _query_vector(fitted, stage, k, horizon_prefix, past):
    past = fitted.train if past is None else np.asarray(past, dtype=np.float64)
    horizon_prefix = np.asarray(horizon_prefix, dtype=np.float64)
    if horizon_prefix.size < stage:
        raise ValueError(f"stage {stage} query needs {stage} horizon returns")
    if past.size < k + 1:
        return None  # no admissible window; every usable size is dead anyway
    raw = np.concatenate([past[-(k + 1):], horizon_prefix[:stage]])
    return _transform(raw[None, :], fitted.config.return_convention)[0]


def _prediction_curve(fitted: FittedStopper, stage: int, horizon_prefix, past=None) -> np.ndarray:
    """Expert predictions at the query for every sample size: (n, experts)."""
    st = _check_stage(fitted, stage)
    n = fitted.train.size
    grid = fitted.config.grid
    curve = np.zeros((n, len(grid)))
    sizes = np.arange(1, n + 1)
    for e, (k, h) in enumerate(grid.entries):
        wmat = st.windows.get(k)
        if wmat is None or wmat.shape[0] < 2:
            continue
        n_sum = wmat.shape[0] - 1
        query = _query_vector(fitted, stage, k, horizon_prefix, past)
        if query is None:
            continue
        kw = radial_weights(
            fitted.config.profile,
            _sq_dists(query[None, :], wmat[:n_sum])[0],
            k + stage + 1,
            h,
        )
        num = np.cumsum(kw * st.targets[k : k + n_sum])
        den = np.cumsum(kw)
        cut = sizes - stage - k - 2  # last usable window per sample size
        alive = cut >= 0
        take = np.clip(cut, 0, n_sum - 1)
        dv = den[take]
        vals = np.where(dv > 0.0, num[take] / np.where(dv > 0.0, dv, 1.0), 0.0)
        curve[:, e] = np.where(alive, vals, 0.0)
    return curve


def expert_predict(
    fitted: FittedStopper,
    stage: int,
    expert,
    sample_size: int,
    horizon_prefix,
    past=None,
) -> float:
    """One expert's local-averaging estimate at the query, at a sample size."""
    st = _check_stage(fitted, stage)
    e = fitted.config.grid.index_of(expert)
    k, h = fitted.config.grid.entries[e]
    n = fitted.train.size
    if not 1 <= sample_size <= n:
        raise ValueError(f"sample size {sample_size} outside [1, {n}]")
    count = sample_size - stage - k - 1  # usable windows; <= 0 means dead
    if count <= 0:
        return 0.0
    wmat = st.windows[k]
    query = _query_vector(fitted, stage, k, horizon_prefix, past)
    if query is None:
        return 0.0
    kw = radial_weights(
        fitted.config.profile, _sq_dists(query[None, :], wmat[:count])[0], k + stage + 1, h
    )
    den = float(kw.sum())
    if den <= 0.0:
        return 0.0
    return float(np.dot(kw, st.targets[k : k + count]) / den)


def stage_targets(fitted: FittedStopper, stage: int) -> np.ndarray:
    """Training targets max(next-epoch gain, nested estimate) for a stage."""
    return _check_stage(fitted, stage).targets.copy()


def cumulative_loss(fitted: FittedStopper, stage: int, expert, sample_size: int) -> float:
    """Mean squared one-step-ahead loss of an expert at a sample size."""
    st = _check_stage(fitted, stage)
    e = fitted.config.grid.index_of(expert)
    if sample_size < 1:
        raise ValueError("sample size must be >= 1")
    idx = min(sample_size - 2, st.loss_sums.shape[1] - 1)
    if idx < 0:
        return 0.0
    return float(st.loss_sums[e, idx] / sample_size)


def mixture_weights(fitted: FittedStopper, stage: int, sample_size: int) -> np.ndarray:
    """Normalized exponential weights over the grid at a sample size."""
    st = _check_stage(fitted, stage)
    n = fitted.train.size
    if not 1 <= sample_size <= n:
        raise ValueError(f"sample size {sample_size} outside [1, {n}]")
    return st.weights[sample_size - 1].copy()


def aggregate_predict(
    fitted: FittedStopper, stage: int, sample_size: int, horizon_prefix, past=None
) -> float:
    """Weight-mixed expert predictions at the query, at one sample size."""
    st = _check_stage(fitted, stage)
    n = fitted.train.size
    if not 1 <= sample_size <= n:
        raise ValueError(f"sample size {sample_size} outside [1, {n}]")
    curve = _prediction_curve(fitted, stage, horizon_prefix, past)
    return float(np.dot(st.weights[sample_size - 1], curve[sample_size - 1]))


def cesaro_predict(fitted: FittedStopper, stage: int, horizon_prefix, past=None) -> float:
    """Arithmetic mean of the aggregated estimates over sample sizes 1..n;
    with the Cesaro flag off, just the full-sample aggregate."""
    st = _check_stage(fitted, stage)
    curve = _prediction_curve(fitted, stage, horizon_prefix, past)
    per_size = (st.weights * curve).sum(axis=1)
    if not fitted.config.cesaro:
        return float(per_size[-1])
    return float(per_size.mean())


def continuation_value(fitted: FittedStopper, stage: int, horizon_prefix, past=None) -> float:
    """The continuation-value estimate driving the stopping rule.

    Stage L is identically 0 by construction.
    """
    if stage == fitted.gains.horizon:
        return 0.0
    return cesaro_predict(fitted, stage, horizon_prefix, past)


def aggregation_dominance_gap(fitted: FittedStopper) -> float:
    """Largest violation of the mixture-loss bound across stages and sizes.

    For every stage and residual count i the mixture's cumulative loss must
    not exceed min over experts of (expert loss - c * ln(prior)), all in
    per-size mean form. Nonpositive (up to float noise) by construction
    whenever c >= 8 * bound^2.
    """
    grid = fitted.config.grid
    worst = -math.inf
    for st in fitted.stages:
        n_t = st.targets.size
        if n_t == 0:
            continue
        agg_resid = np.square(st.agg_online[:n_t] - st.targets)
        agg_resid[: st.skip] = 0.0
        agg_cum = np.cumsum(agg_resid)
        penalty = -fitted.c * np.log(grid.prior)
        bound = (st.loss_sums + penalty[:, None]).min(axis=0)
        sizes = np.arange(1, n_t + 1) + 1  # residual count i pairs with size i+1
        worst = max(worst, float(((agg_cum - bound) / sizes).max()))
    return worst
