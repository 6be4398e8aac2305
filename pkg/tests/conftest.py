import numpy as np
import pytest

from batlife import simgen
from batlife.dataset import RelaxationCurve
from batlife.ecm import EcmParams, predict_relaxation

CUTOFF_A = 0.175
INTERVAL_S = 120.0


def relaxation_curve(params: EcmParams, n_samples: int = 16, noise: float = 0.0,
                     rng=None, interval: float = INTERVAL_S,
                     current: float = CUTOFF_A) -> RelaxationCurve:
    """Exact model curve on the standard 2-minute grid, optional noise."""
    times = np.arange(n_samples) * interval
    voltages = predict_relaxation(params, current, times)
    if noise > 0.0:
        voltages = voltages + (rng or np.random.default_rng(0)).normal(0.0, noise, n_samples)
    return RelaxationCurve(times, voltages, interval, current)


@pytest.fixture(scope="session")
def small_fleet():
    """Two-condition, two-cell fleet for fast integration tests."""
    return simgen.benchmark_fleet(
        seed=101, cells_per_condition=2, fade_refs=(120.0, 240.0),
        temperatures=(25, 45), discharge_knots=200,
    )


@pytest.fixture(scope="session")
def drifting_cell():
    """One noiseless cell with monotone drift, modest horizon."""
    profile = simgen.condition_profile(300.0, seed=5, noise_sigma_v=0.0, cell_spread=0.0)
    return simgen.simulate_cell(profile, simgen.NCA_PROTOCOL, 60, cell_id="drift-00")
