"""stoprule: stopping rules for finite-horizon gain sequences, learned from a
single observed stationary return path.

The estimator builds kernel local-averaging continuation-value estimates for
a grid of (lag, bandwidth) experts, scores them by online squared loss, mixes
them with exponential weights, and derives the rule "stop at the first epoch
whose gain reaches the estimated continuation value". A GARCH(1,1) world,
two trivial baselines, a regression comparator and an exact finite-model
dynamic-programming oracle support benchmarking and verification.
"""

from .core import (
    GainSpec,
    PayoffSpec,
    ReturnPath,
    gain_eval,
    option_gains,
    payoff_bound,
    payoff_eval,
    returns_from_prices,
    returns_to_prices,
)
from .estimator import (
    EstimatorConfig,
    ExpertGrid,
    FittedStopper,
    aggregate_predict,
    aggregation_dominance_gap,
    cesaro_predict,
    continuation_value,
    cumulative_loss,
    default_grid,
    expert_predict,
    fit_stopper,
    mixture_weights,
    stage_targets,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    build_experiment_config,
    ingest_returns,
    run_benchmark,
    summarize,
)
from .kernel import KernelProfile, kernel_eval
from .oracle import (
    FiniteModel,
    OracleTables,
    brute_force_value,
    exact_continuation,
    exact_value_and_rule,
    gap_bound_check,
    gap_bound_holds,
)
from .simulate import (
    GarchParams,
    finite_paths,
    garch_paths,
    write_returns,
)
from .stopping import StopDecision, decide_stop, decide_stop_batch, realized_gain

__version__ = "0.1.0"
