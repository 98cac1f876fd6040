import numpy as np
import pytest

from stoprule.core import GainSpec, PayoffSpec, option_gains
from stoprule.estimator import EstimatorConfig, ExpertGrid, fit_stopper
from stoprule.kernel import KernelProfile


@pytest.fixture
def small_grid():
    return ExpertGrid(entries=((0, 0.05), (1, 0.2), (2, 0.5)), prior=np.array([0.5, 0.3, 0.2]))


@pytest.fixture
def rough_gains():
    """Nonlinear bounded gains on a 3-epoch horizon, exercising max/kernel paths."""
    B = 4.0

    def g_of(j):
        if j == 0:
            return lambda prefix: 1.0
        return lambda prefix: min(B, max(0.0, 6.0 * B * abs(float(np.prod(prefix)) - 1.0)))

    return GainSpec(horizon=3, bound=B, gains=tuple(g_of(j) for j in range(4)))


@pytest.fixture
def small_fit(small_grid, rough_gains):
    rng = np.random.default_rng(3)
    z = np.exp(rng.normal(0.002, 0.05, 40))
    cfg = EstimatorConfig(grid=small_grid, cesaro=True)
    return fit_stopper(z, rough_gains, cfg)


@pytest.fixture
def butterfly_gains():
    return option_gains(PayoffSpec.butterfly(), 4)


@pytest.fixture
def compact_config(small_grid):
    return EstimatorConfig(grid=small_grid, profile=KernelProfile("compact-uniform"))
