"""Feature engineering for life prediction and classification.

Two families feed the learners:

* state features: the six circuit parameters identified from one cycle's
  relaxation transient (where the cell is on its aging trajectory), and
* rate features: how fast it is moving, measured from differences between
  cycles. For prediction these come from the relaxed-voltage difference
  within a (reference, current) cycle window; for classification from the
  capacity-vs-voltage difference and the discharge-time difference of two
  adjacent cycles.

Feature vectors carry a fixed, named ordering per feature set so trained
models remain compatible with later extractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import ecm
from .dataset import CellHistory, DischargeCurve, RelaxationCurve
from .errors import (
    HorizonExceedsDataError,
    MissingDischargeDataError,
    NoVoltageOverlapError,
    TimeGridMismatchError,
    ValidationError,
)

DELTA_Q_GRID_POINTS = 1000
DELTA_Q_VARIANCE_FLOOR = 1e-12  # Ah^2, keeps the log defined for identical curves
DELTA_T_FLOOR_S = 1e-3

ECM_NAMES = ecm.EcmParams.names()
STATS_NAMES = (
    "dv_variance", "dv_skewness", "dv_kurtosis",
    "dv_max", "dv_min", "dv_mean", "dv_sum", "dv_last",
)
RATE_PRED_NAMES = ("dv_sum", "dv_last")
RATE_CLASS_NAMES = ("dq_var_log10", "dt_log10")
BENCHMARK_NAMES = ("sum_ah", "sum_days")


class FeatureSet(str, Enum):
    ECM = "ECM"
    STATS = "STATS"
    BENCHMARK = "BENCHMARK"
    NOVEL_PRED = "NOVEL_PRED"
    NOVEL_CLASS = "NOVEL_CLASS"
    RATE_CLASS = "RATE_CLASS"

    @classmethod
    def parse(cls, text: str) -> "FeatureSet":
        key = text.strip().upper().replace("-", "_")
        for member in cls:
            if member.value == key:
                return member
        raise ValidationError(f"unknown feature set {text!r}")


FEATURE_NAMES: dict[FeatureSet, tuple[str, ...]] = {
    FeatureSet.ECM: ECM_NAMES,
    FeatureSet.STATS: STATS_NAMES,
    FeatureSet.BENCHMARK: ECM_NAMES + BENCHMARK_NAMES,
    FeatureSet.NOVEL_PRED: ECM_NAMES + RATE_PRED_NAMES,
    FeatureSet.NOVEL_CLASS: ECM_NAMES + RATE_CLASS_NAMES,
    FeatureSet.RATE_CLASS: RATE_CLASS_NAMES,
}

# Feature sets that difference two cycles' curves.
RATE_SETS = (FeatureSet.STATS, FeatureSet.NOVEL_PRED, FeatureSet.NOVEL_CLASS, FeatureSet.RATE_CLASS)
# Feature sets built on discharge data (adjacent-cycle classification).
DISCHARGE_SETS = (FeatureSet.NOVEL_CLASS, FeatureSet.RATE_CLASS)


class WindowMode(str, Enum):
    FIXED_REFERENCE = "fixed_reference"
    ADJACENT = "adjacent"


@dataclass(frozen=True)
class WindowSpec:
    """How the reference cycle n of a degradation window relates to m."""

    mode: WindowMode = WindowMode.FIXED_REFERENCE
    reference_cycle: int = 1

    def reference_for(self, current_cycle: int) -> int:
        if self.mode is WindowMode.ADJACENT:
            n = current_cycle - 1
        else:
            n = self.reference_cycle
        if current_cycle <= n:
            raise ValidationError(
                f"window needs current cycle > reference cycle (got m={current_cycle}, n={n})"
            )
        return n


@dataclass(frozen=True)
class FeatureVector:
    values: dict[str, float]
    cycle_index: int
    cell_id: str
    feature_set: FeatureSet

    def __post_init__(self):
        expected = FEATURE_NAMES[self.feature_set]
        if tuple(self.values.keys()) != expected:
            raise ValidationError(
                f"{self.feature_set.value} features must be ordered {expected}, "
                f"got {tuple(self.values.keys())}"
            )
        if not all(math.isfinite(v) for v in self.values.values()):
            raise ValidationError(f"non-finite feature value in {self.values}")

    def as_array(self) -> np.ndarray:
        return np.array(list(self.values.values()), dtype=float)


# ---------------------------------------------------------------------------
# Relaxed-voltage differences
# ---------------------------------------------------------------------------

def delta_v(curve_m: RelaxationCurve, curve_n: RelaxationCurve) -> np.ndarray:
    """Pointwise voltage difference V_m(t) - V_n(t) on the shared grid."""
    if curve_m.times_s.size != curve_n.times_s.size or not np.array_equal(
        curve_m.times_s, curve_n.times_s
    ):
        raise TimeGridMismatchError("relaxation curves are not on an identical time grid")
    return curve_m.voltages_v - curve_n.voltages_v


def delta_v_features(dv: np.ndarray, sampling_s: float, horizon_s: float) -> tuple[float, float]:
    """Summation and last value of the voltage difference over (0, horizon].

    The t = 0 sample is excluded: it still carries the ohmic step under the
    cutoff current, not pure polarization decay.
    """
    dv = np.asarray(dv, dtype=float)
    n_points = int(round(horizon_s / sampling_s)) + 1
    if n_points > dv.size:
        raise HorizonExceedsDataError(
            f"horizon {horizon_s:g} s needs {n_points} samples, curve has {dv.size}"
        )
    window = dv[1:n_points]
    return float(window.sum()), float(dv[n_points - 1])


def stats_features(dv: np.ndarray) -> tuple[dict[str, float], bool]:
    """Eight summary statistics of a voltage-difference sequence.

    Variance uses the n-1 normalization; skewness and kurtosis are the
    third and fourth standardized central moments. A constant sequence has
    undefined shape moments: both are reported as 0 and the degenerate flag
    is set.
    """
    dv = np.asarray(dv, dtype=float)
    if dv.size < 2:
        raise ValidationError("statistics need at least 2 points")
    mean = float(dv.mean())
    centered = dv - mean
    m2 = float(np.mean(centered**2))
    # Standardize before taking higher moments: powers of the raw central
    # moments underflow for near-constant sequences.
    scale = math.sqrt(m2)
    degenerate = scale == 0.0
    if degenerate:
        skewness, kurtosis = 0.0, 0.0
    else:
        z = centered / scale
        skewness = float(np.mean(z**3))
        kurtosis = float(np.mean(z**4))
    values = {
        "dv_variance": float(centered @ centered / (dv.size - 1)),
        "dv_skewness": skewness,
        "dv_kurtosis": kurtosis,
        "dv_max": float(dv.max()),
        "dv_min": float(dv.min()),
        "dv_mean": mean,
        "dv_sum": float(dv.sum()),
        "dv_last": float(dv[-1]),
    }
    return values, degenerate


# ---------------------------------------------------------------------------
# Discharge-curve differences
# ---------------------------------------------------------------------------

def _charge_of_voltage(curve: DischargeCurve, grid_v: np.ndarray) -> np.ndarray:
    # Discharge voltage is non-increasing along q: flip to ascending for interp.
    v_ascending = curve.voltages_v[::-1]
    q_matching = curve.charges_ah[::-1]
    return np.interp(grid_v, v_ascending, q_matching)


def delta_q_variance(
    disc_m: DischargeCurve,
    disc_n: DischargeCurve,
    grid_points: int = DELTA_Q_GRID_POINTS,
) -> float:
    """log10 sample variance of Q_m(V) - Q_n(V) on a shared voltage grid.

    Both capacity-vs-voltage curves are linearly interpolated onto a
    uniform grid over their voltage overlap; the variance is floored at
    1e-12 Ah^2 so identical curves return -12 instead of -inf.
    """
    if grid_points < 2:
        raise ValidationError("voltage grid needs at least 2 points")
    lo = max(disc_m.voltages_v.min(), disc_n.voltages_v.min())
    hi = min(disc_m.voltages_v.max(), disc_n.voltages_v.max())
    if lo >= hi:
        raise NoVoltageOverlapError(
            f"discharge curves share no voltage range ([{lo:.3f}, {hi:.3f}])"
        )
    grid = np.linspace(lo, hi, grid_points)
    dq = _charge_of_voltage(disc_m, grid) - _charge_of_voltage(disc_n, grid)
    variance = float(np.var(dq, ddof=1))
    return math.log10(max(variance, DELTA_Q_VARIANCE_FLOOR))


def delta_t(disc_m: DischargeCurve, disc_n: DischargeCurve) -> float:
    """log10 absolute difference of the two discharge durations (seconds)."""
    gap = abs(disc_m.duration_s - disc_n.duration_s)
    return math.log10(max(gap, DELTA_T_FLOOR_S))


# ---------------------------------------------------------------------------
# Throughput bookkeeping
# ---------------------------------------------------------------------------

def benchmark_features(history: CellHistory, cycle_index: int) -> tuple[float, float]:
    """Cumulative ampere-hours and calendar days up to a cycle."""
    record = history.record(cycle_index)
    return record.cumulative_ah, record.calendar_days


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _fitted_params(
    history: CellHistory,
    cycle_index: int,
    truncate: int | None,
    cache: dict | None,
) -> ecm.EcmParams:
    key = (cycle_index, truncate)
    if cache is not None and key in cache:
        return cache[key]
    curve = history.record(cycle_index).relaxation
    if truncate is not None:
        curve = curve.truncated(truncate)
    params = ecm.fit(curve).params
    if cache is not None:
        cache[key] = params
    return params


def _relaxation(history, cycle_index, truncate):
    curve = history.record(cycle_index).relaxation
    return curve.truncated(truncate) if truncate is not None else curve


def assemble(
    history: CellHistory,
    cycle_index: int,
    window: WindowSpec,
    feature_set: FeatureSet,
    truncate: int | None = None,
    fit_cache: dict | None = None,
) -> FeatureVector:
    """Build one cycle's feature vector for the requested set.

    ``truncate`` limits each relaxation curve to its first samples (shorter
    observed rest). ``fit_cache`` memoizes circuit fits across calls for
    the same cell.
    """
    if feature_set in DISCHARGE_SETS and window.mode is not WindowMode.ADJACENT:
        raise ValidationError(
            f"{feature_set.value} uses adjacent-cycle differences; "
            "window mode must be 'adjacent'"
        )

    values: dict[str, float] = {}

    if feature_set in (FeatureSet.ECM, FeatureSet.BENCHMARK, FeatureSet.NOVEL_PRED,
                       FeatureSet.NOVEL_CLASS):
        params = _fitted_params(history, cycle_index, truncate, fit_cache)
        values.update(zip(ECM_NAMES, params.as_array()))

    if feature_set in (FeatureSet.STATS, FeatureSet.NOVEL_PRED):
        reference = window.reference_for(cycle_index)
        curve_m = _relaxation(history, cycle_index, truncate)
        curve_n = _relaxation(history, reference, truncate)
        dv = delta_v(curve_m, curve_n)
        horizon = float(curve_m.times_s[-1])
        if feature_set is FeatureSet.STATS:
            # Shape statistics over the polarization-decay window (t > 0),
            # the same span the summation feature is defined on.
            stats, _ = stats_features(dv[1:])
            values.update(stats)
        else:
            dv_sum, dv_last = delta_v_features(dv, curve_m.sampling_interval_s, horizon)
            values["dv_sum"] = dv_sum
            values["dv_last"] = dv_last

    if feature_set in DISCHARGE_SETS:
        reference = window.reference_for(cycle_index)
        record_m = history.record(cycle_index)
        record_n = history.record(reference)
        if record_m.discharge is None or record_n.discharge is None:
            raise MissingDischargeDataError(
                f"cell {history.cell_id}: cycles {reference},{cycle_index} lack discharge data"
            )
        values["dq_var_log10"] = delta_q_variance(record_m.discharge, record_n.discharge)
        values["dt_log10"] = delta_t(record_m.discharge, record_n.discharge)

    if feature_set is FeatureSet.BENCHMARK:
        sum_ah, sum_days = benchmark_features(history, cycle_index)
        values["sum_ah"] = sum_ah
        values["sum_days"] = sum_days

    ordered = {name: values[name] for name in FEATURE_NAMES[feature_set]}
    return FeatureVector(
        values=ordered,
        cycle_index=cycle_index,
        cell_id=history.cell_id,
        feature_set=feature_set,
    )
