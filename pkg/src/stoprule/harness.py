"""Experiment orchestration: scenarios, config plumbing, CSV persistence.

Scenarios
---------
``garch-table1``   four policies (simple1, simple2, new, lsm) benchmarked on
                   simulated GARCH worlds; every repetition redraws the
                   shared past, the evaluation continuations and the
                   regression comparator's training paths from disjoint
                   substreams of the master seed.
``finite-oracle``  the fitted policy against the exact dynamic-programming
                   rule on a finite-support return law.
``custom-data``    fit on an ingested returns file and decide on its final
                   stretch (one repetition, one realized horizon).

Output is one CSV per run: ``algorithm,repetition,mean_payoff`` rows with six
decimals, then a ``summary`` block with ``algorithm,mean,sd``. Identical
config and seed give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import LsmConfig, baseline_stop, lsm_fit, lsm_stop
from .core import GainSpec, PayoffSpec, ReturnPath, option_gains, payoff_bound
from .estimator import EstimatorConfig, ExpertGrid, fit_stopper
from .kernel import KernelProfile
from .oracle import FiniteModel, exact_continuation
from .simulate import (
    STREAM_AUX,
    STREAM_EVAL,
    STREAM_PAST,
    GarchParams,
    garch_continuations,
    garch_past_from_innovations,
    finite_paths,
    normals,
    substream,
)
from .stopping import decide_stop_batch

__all__ = [
    "ConfigError",
    "DataValidationError",
    "ExperimentConfig",
    "ResultTable",
    "SCENARIOS",
    "ALGORITHMS",
    "run_benchmark",
    "ingest_returns",
    "summarize",
    "parse_config_file",
    "build_experiment_config",
    "DESK_PRESET",
]

SCENARIOS = ("garch-table1", "finite-oracle", "custom-data")
ALGORITHMS = ("simple1", "simple2", "new", "lsm", "oracle")


class ConfigError(ValueError):
    """Infeasible or malformed configuration; reported before any compute."""


class DataValidationError(ValueError):
    """Bad ingested data; messages carry line numbers."""


def summarize(per_rep_means) -> tuple[float, float]:
    """Mean and sample standard deviation (divisor count - 1, 0 for one rep)."""
    arr = np.asarray(per_rep_means, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one repetition to summarize")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sd


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int
    out: str | None = None
    train_len: int = 1500
    eval_paths: int = 1000
    repetitions: int = 100
    horizon: int = 4
    algorithms: tuple = ("simple1", "simple2", "new", "lsm")
    payoff: PayoffSpec = field(default_factory=PayoffSpec.butterfly)
    bound: float | None = None  # gain-bound override (None: payoff maximum)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    lsm: LsmConfig = field(default_factory=LsmConfig)
    garch: GarchParams = field(default_factory=GarchParams)
    finite_model: FiniteModel | None = None
    data_file: str | None = None

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; pick from {SCENARIOS}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        for name, v in (
            ("train_len", self.train_len),
            ("eval_paths", self.eval_paths),
            ("repetitions", self.repetitions),
        ):
            if v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}; pick from {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigError("need at least one algorithm")
        max_lag = max(k for k, _ in self.estimator.grid.entries)
        if self.train_len <= max_lag + self.horizon + 1:
            raise ConfigError(
                f"train_len {self.train_len} must exceed max lag + horizon + 1 "
                f"= {max_lag + self.horizon + 1}"
            )
        if self.scenario == "garch-table1":
            if "oracle" in self.algorithms:
                raise ConfigError("the oracle policy needs a finite-support scenario")
            if self.train_len > self.garch.burn_in:
                raise ConfigError(
                    f"train_len {self.train_len} exceeds the burn_in stretch "
                    f"{self.garch.burn_in}"
                )
        if self.scenario == "finite-oracle":
            if self.finite_model is None:
                raise ConfigError("finite-oracle needs a finite model (finite.* keys)")
            if "lsm" in self.algorithms:
                raise ConfigError("the lsm comparator needs the garch scenario's hidden state")
        if self.scenario == "custom-data":
            if self.data_file is None:
                raise ConfigError("custom-data needs data.file")
            bad = [a for a in self.algorithms if a in ("lsm", "oracle")]
            if bad:
                raise ConfigError(f"{bad} cannot run on observed data")


@dataclass(frozen=True)
class ResultTable:
    algorithms: tuple
    per_rep: dict  # algorithm -> np.ndarray of per-repetition mean payoffs

    def summary(self) -> dict:
        return {a: summarize(self.per_rep[a]) for a in self.algorithms}

    def to_csv_text(self) -> str:
        lines = ["algorithm,repetition,mean_payoff"]
        for a in self.algorithms:
            for r, m in enumerate(self.per_rep[a], start=1):
                lines.append(f"{a},{r},{m:.6f}")
        lines.append("summary")
        lines.append("algorithm,mean,sd")
        for a in self.algorithms:
            mean, sd = summarize(self.per_rep[a])
            lines.append(f"{a},{mean:.6f},{sd:.6f}")
        return "\n".join(lines) + "\n"


def ingest_returns(path: str) -> ReturnPath:
    """Read a plain-text return series: one positive decimal per line, oldest
    first. Validation failures name the offending line."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise DataValidationError(f"cannot read returns file {path}: {exc}") from exc
    values = []
    for lineno, line in enumerate(raw, start=1):
        text = line.strip()
        if not text:
            raise DataValidationError(f"line {lineno}: empty line")
        try:
            value = float(text)
        except ValueError:
            raise DataValidationError(f"line {lineno}: not a decimal: {text!r}") from None
        if not math.isfinite(value) or value <= 0.0:
            raise DataValidationError(
                f"line {lineno}: returns must be finite and positive, got {text}"
            )
        values.append(value)
    if not values:
        raise DataValidationError("returns file is empty")
    return ReturnPath(values=np.asarray(values), origin=len(values))


def _gains_for(config: ExperimentConfig) -> GainSpec:
    return option_gains(config.payoff, config.horizon, bound=config.bound)


def _mean_gain(decisions) -> float:
    return float(np.mean([d.gain for d in decisions]))


def _run_garch_rep(config: ExperimentConfig, gains: GainSpec, rep: int) -> dict:
    seed = config.seed
    eps = normals(substream(seed, STREAM_PAST, rep), config.garch.burn_in + 1)
    past = garch_past_from_innovations(config.garch, eps, config.train_len)
    evals = garch_continuations(
        config.garch, past, config.horizon, config.eval_paths,
        substream(seed, STREAM_EVAL, rep),
    )
    out = {}
    for kind, name in (("first-positive", "simple1"), ("at-expiry", "simple2")):
        if name in config.algorithms:
            out[name] = _mean_gain(
                [baseline_stop(kind, gains, row) for row in evals.returns]
            )
    if "new" in config.algorithms:
        fitted = fit_stopper(past.returns, gains, config.estimator)
        out["new"] = _mean_gain(decide_stop_batch(fitted, evals.returns))
    if "lsm" in config.algorithms:
        train = garch_continuations(
            config.garch, past, config.horizon, config.lsm.num_train_paths,
            substream(seed, STREAM_AUX, rep),
        )
        policy = lsm_fit(config.lsm, gains, train)
        out["lsm"] = _mean_gain(
            [lsm_stop(policy, evals, i) for i in range(evals.num_paths)]
        )
    return out


def _run_finite_rep(config: ExperimentConfig, gains: GainSpec, tables, rep: int) -> dict:
    world = finite_paths(
        config.finite_model, config.train_len, config.horizon, config.eval_paths,
        config.seed, rep=rep,
    )
    out = {}
    for kind, name in (("first-positive", "simple1"), ("at-expiry", "simple2")):
        if name in config.algorithms:
            out[name] = _mean_gain(
                [baseline_stop(kind, gains, row) for row in world.eval_returns]
            )
    if "new" in config.algorithms:
        fitted = fit_stopper(world.past_returns, gains, config.estimator)
        out["new"] = _mean_gain(decide_stop_batch(fitted, world.eval_returns))
    if "oracle" in config.algorithms:
        cache: dict = {}
        gains_sum = 0.0
        for row in world.eval_returns:
            key = row.tobytes()
            if key not in cache:
                cache[key] = tables.rule_decision(row).gain
            gains_sum += cache[key]
        out["oracle"] = gains_sum / world.eval_returns.shape[0]
    return out


def _run_custom_rep(config: ExperimentConfig, gains: GainSpec) -> dict:
    path = ingest_returns(config.data_file)
    L = config.horizon
    if len(path) <= L + 1:
        raise DataValidationError(
            f"returns file has {len(path)} entries; need more than horizon + 1 = {L + 1}"
        )
    train = path.values[:-L]
    horizon = path.values[-L:]
    out = {}
    for kind, name in (("first-positive", "simple1"), ("at-expiry", "simple2")):
        if name in config.algorithms:
            out[name] = baseline_stop(kind, gains, horizon).gain
    if "new" in config.algorithms:
        fitted = fit_stopper(train, gains, config.estimator)
        out["new"] = _mean_gain(decide_stop_batch(fitted, horizon[None, :]))
    return out


def run_benchmark(config: ExperimentConfig) -> ResultTable:
    """Run every configured algorithm over all repetitions and persist a CSV."""
    config.validate()
    gains = _gains_for(config)
    per_rep = {a: np.zeros(config.repetitions) for a in config.algorithms}
    tables = None
    if config.scenario == "finite-oracle" and "oracle" in config.algorithms:
        tables = exact_continuation(config.finite_model, gains)
    for rep in range(1, config.repetitions + 1):
        if config.scenario == "garch-table1":
            rep_means = _run_garch_rep(config, gains, rep)
        elif config.scenario == "finite-oracle":
            rep_means = _run_finite_rep(config, gains, tables, rep)
        else:
            rep_means = _run_custom_rep(config, gains)
        for a in config.algorithms:
            per_rep[a][rep - 1] = rep_means[a]
    table = ResultTable(algorithms=tuple(config.algorithms), per_rep=per_rep)
    if config.out is not None:
        with open(config.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(table.to_csv_text())
    return table


# --- configuration plumbing -------------------------------------------------

DESK_PRESET = {
    "run.repetitions": "5",
    "run.eval_paths": "200",
    "run.train_len": "500",
    "estimator.cesaro": "false",
    "estimator.skip_scale": "50",
}

_SCENARIO_DEFAULTS = {
    "garch-table1": {
        "run.algorithms": "simple1,simple2,new,lsm",
        "estimator.skip_scale": "200",
    },
    "finite-oracle": {
        "run.algorithms": "simple1,simple2,new,oracle",
        "run.train_len": "5000",
        "run.eval_paths": "10000",
        "run.repetitions": "1",
        "run.horizon": "2",
        "estimator.cesaro": "true",
        "payoff.kind": "put",
        "payoff.params": "100",
        "payoff.rate": "0",
        "finite.kind": "iid",
        "finite.support": "0.99,1.005",
        "finite.law": "0.5,0.5",
        "finite.bound": "2",
    },
    "custom-data": {
        "run.algorithms": "simple1,simple2,new",
        "run.repetitions": "1",
        "run.eval_paths": "1",
    },
}

_KNOWN_KEYS = {
    "run.train_len", "run.eval_paths", "run.repetitions", "run.horizon",
    "run.algorithms",
    "payoff.kind", "payoff.params", "payoff.knots_x", "payoff.knots_y",
    "payoff.rate", "payoff.step", "payoff.anchor",
    "estimator.lags", "estimator.bandwidths", "estimator.kernel",
    "estimator.cesaro", "estimator.skip_scale", "estimator.temperature",
    "estimator.convention",
    "lsm.degree", "lsm.train_paths", "lsm.ridge",
    "garch.r_star", "garch.lambda", "garch.delta0", "garch.delta1",
    "garch.xi1", "garch.burn_in", "garch.x0",
    "finite.kind", "finite.support", "finite.law", "finite.initial",
    "finite.bound",
    "data.file",
}


def parse_config_file(path: str) -> dict:
    """Flat key-value text: one ``section.key = value`` per line; blank lines
    and ``#`` comments allowed."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out: dict = {}
    for lineno, line in enumerate(raw, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
        key, _, value = text.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _parse_int(kv, key, default):
    if key not in kv:
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {kv[key]!r}") from None


def _parse_float(kv, key, default):
    if key not in kv:
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {kv[key]!r}") from None


def _parse_bool(kv, key, default):
    if key not in kv:
        return default
    text = kv[key].lower()
    if text in ("true", "yes", "1", "on"):
        return True
    if text in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {kv[key]!r}")


def _parse_floats(kv, key, default):
    if key not in kv:
        return default
    try:
        return tuple(float(tok) for tok in kv[key].split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated numbers, got {kv[key]!r}") from None


def _build_payoff(kv) -> PayoffSpec:
    kind = kv.get("payoff.kind", "butterfly")
    rate = _parse_float(kv, "payoff.rate", 0.05)
    step = _parse_float(kv, "payoff.step", 0.25)
    anchor = _parse_float(kv, "payoff.anchor", 100.0)
    common = dict(rate=rate, step=step, anchor_price=anchor)
    try:
        if kind == "butterfly":
            params = _parse_floats(kv, "payoff.params", (99.0, 107.0))
            return PayoffSpec(kind=kind, parameters=tuple(params), **common)
        if kind == "put":
            params = _parse_floats(kv, "payoff.params", (100.0,))
            return PayoffSpec(kind=kind, parameters=tuple(params), **common)
        if kind == "custom-table":
            xs = _parse_floats(kv, "payoff.knots_x", None)
            ys = _parse_floats(kv, "payoff.knots_y", None)
            if xs is None or ys is None:
                raise ConfigError("custom-table needs payoff.knots_x and payoff.knots_y")
            return PayoffSpec(kind=kind, parameters=(xs, ys), **common)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad payoff configuration: {exc}") from exc
    raise ConfigError(f"unknown payoff.kind {kind!r}")


def _build_estimator(kv) -> EstimatorConfig:
    lags = _parse_floats(kv, "estimator.lags", (0.0, 1.0, 2.0))
    bands = _parse_floats(kv, "estimator.bandwidths", (0.001, 0.01, 0.1))
    entries = tuple((int(k), float(h)) for k in lags for h in bands)
    try:
        grid = ExpertGrid(
            entries=entries, prior=np.full(len(entries), 1.0 / len(entries))
        )
        profile = KernelProfile(kv.get("estimator.kernel", "gaussian"))
        temp = kv.get("estimator.temperature", "").strip() if "estimator.temperature" in kv else ""
        return EstimatorConfig(
            grid=grid,
            profile=profile,
            temperature=float(temp) if temp else None,
            cesaro=_parse_bool(kv, "estimator.cesaro", False),
            skip_scale=_parse_int(kv, "estimator.skip_scale", 0),
            return_convention=kv.get("estimator.convention", "interval-anchored"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad estimator configuration: {exc}") from exc


def _build_finite(kv) -> FiniteModel | None:
    if "finite.support" not in kv:
        return None
    support = _parse_floats(kv, "finite.support", None)
    kind = kv.get("finite.kind", "iid")
    law_text = kv.get("finite.law", "")
    try:
        if kind == "iid":
            law = np.asarray(_parse_floats({"x": law_text}, "x", None))
        else:
            law = np.asarray(
                [[float(t) for t in row.split(",")] for row in law_text.split(";")]
            )
        return FiniteModel(
            kind=kind,
            support=np.asarray(support),
            law=law,
            initial=_parse_int(kv, "finite.initial", 0),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad finite model configuration: {exc}") from exc


def build_experiment_config(
    scenario: str,
    seed: int,
    out: str | None,
    file_keys: dict | None = None,
    preset: str | None = None,
    overrides: dict | None = None,
) -> ExperimentConfig:
    """Merge defaults < scenario defaults < config file < preset < CLI
    overrides into a validated ExperimentConfig."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; pick from {SCENARIOS}")
    kv: dict = dict(_SCENARIO_DEFAULTS[scenario])
    kv.update(file_keys or {})
    if preset is not None:
        if preset != "desk":
            raise ConfigError(f"unknown preset {preset!r}; only 'desk' exists")
        kv.update(DESK_PRESET)
    for key, value in (overrides or {}).items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        kv[key] = value
    algorithms = tuple(
        tok.strip() for tok in kv.get("run.algorithms", "simple1,simple2,new,lsm").split(",")
        if tok.strip()
    )
    try:
        garch = GarchParams(
            r_star=_parse_float(kv, "garch.r_star", 0.05),
            lam=_parse_float(kv, "garch.lambda", 0.7136),
            delta0=_parse_float(kv, "garch.delta0", 0.0000664),
            delta1=_parse_float(kv, "garch.delta1", 0.144),
            xi1=_parse_float(kv, "garch.xi1", 0.776),
            burn_in=_parse_int(kv, "garch.burn_in", 1600),
            x0=_parse_float(kv, "garch.x0", 100.0),
        )
        lsm = LsmConfig(
            degree=_parse_int(kv, "lsm.degree", 2),
            num_train_paths=_parse_int(kv, "lsm.train_paths", 1000),
            ridge=_parse_float(kv, "lsm.ridge", 1e-8),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config = ExperimentConfig(
        scenario=scenario,
        seed=seed,
        out=out,
        train_len=_parse_int(kv, "run.train_len", 1500),
        eval_paths=_parse_int(kv, "run.eval_paths", 1000),
        repetitions=_parse_int(kv, "run.repetitions", 100),
        horizon=_parse_int(kv, "run.horizon", 4),
        algorithms=algorithms,
        payoff=_build_payoff(kv),
        bound=_parse_float(kv, "finite.bound", None),
        estimator=_build_estimator(kv),
        lsm=lsm,
        garch=garch,
        finite_model=_build_finite(kv),
        data_file=kv.get("data.file"),
    )
    config.validate()
    return config
