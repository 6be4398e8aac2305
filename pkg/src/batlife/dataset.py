"""Canonical data model for battery cycling data.

One CSV per cell, long format, columns::

    cycle, phase, t_s, voltage_v, current_a, capacity_ah

with ``phase`` one of ``charge``, ``rest_post_charge``, ``discharge``,
``rest_post_discharge``. Only the post-charge rest (the relaxation
transient used for aging features) and the CC discharge are consumed;
other phases are accepted and ignored. Rest rows carry the cycle's
measured capacity in ``capacity_ah`` so relaxation-only logs still have a
capacity trace; discharge rows carry the running discharged charge.

Two bookkeeping quantities are derived, not stored, so that a write/ingest
round trip is exact:

* cumulative throughput = twice the cumulative discharged Ah (full cycles
  charge back what they discharged), and
* calendar time = the sum of per-cycle durations reconstructed from the
  condition code (charge and discharge C-rates) plus two rest periods.

A plain-text key/value manifest lists the cells of a dataset together with
their chemistry, condition code, nominal capacity, and sampling protocol.
"""

from __future__ import annotations

import csv
import hashlib
import io
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFileError,
    InsufficientCellsError,
    NeverReachedError,
    SchemaError,
    UnknownCycleError,
    ValidationError,
)

CANONICAL_COLUMNS = ("cycle", "phase", "t_s", "voltage_v", "current_a", "capacity_ah")
PHASES = ("charge", "rest_post_charge", "discharge", "rest_post_discharge")

VOLTAGE_MIN_V = 2.0
VOLTAGE_MAX_V = 4.5

DEFAULT_SOH_EOL = 0.80
EOL_MEDIAN_WINDOW = 5

# CV-phase cutoff current as a fraction of nominal capacity per hour (0.05C).
CUTOFF_C_RATE = 0.05

SECONDS_PER_DAY = 86400.0


class Chemistry(str, Enum):
    NCA = "NCA"
    NCM = "NCM"
    NCM_NCA = "NCM+NCA"

    @classmethod
    def parse(cls, text: str) -> "Chemistry":
        normalized = text.strip().upper().replace("_", "+")
        for member in cls:
            if member.value == normalized:
                return member
        raise ValidationError(f"unknown chemistry {text!r}")


# Protocol voltage windows by chemistry (lower cutoff, upper cutoff), volts.
CUTOFF_WINDOWS_V = {
    Chemistry.NCA: (2.65, 4.2),
    Chemistry.NCM: (2.5, 4.2),
    Chemistry.NCM_NCA: (2.5, 4.2),
}

_CONDITION_RE = re.compile(r"^CY(?P<temp>\d+(?:\.\d+)?)-(?P<chg>\d+(?:\.\d+)?)/(?P<dis>\d+(?:\.\d+)?)$")


def parse_condition(code: str) -> tuple[float, float, float]:
    """Split a condition code ``CY<temp>-<charge C>/<discharge C>``.

    Returns (temperature_c, charge_rate_c, discharge_rate_c).
    """
    match = _CONDITION_RE.match(code.strip())
    if match is None:
        raise ValidationError(f"condition code {code!r} is not of the form CY<T>-<chg>/<dis>")
    return (float(match["temp"]), float(match["chg"]), float(match["dis"]))


@dataclass(frozen=True)
class RelaxationCurve:
    """Voltage transient during the rest after charging.

    ``times_s`` starts at 0 (the instant the charger disconnects, still at
    the CV cutoff current) and is strictly increasing; ``voltages_v`` are
    the sampled terminal voltages.
    """

    times_s: np.ndarray
    voltages_v: np.ndarray
    sampling_interval_s: float
    cutoff_current_a: float

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=float)
        v = np.asarray(self.voltages_v, dtype=float)
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "voltages_v", v)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size:
            raise ValidationError("relaxation times and voltages must be 1-D and equal length")
        if t.size < 2:
            raise ValidationError("relaxation curve needs at least 2 samples")
        if t[0] != 0.0:
            raise ValidationError("relaxation curve must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("relaxation times must be strictly increasing")
        if np.any(v < VOLTAGE_MIN_V) or np.any(v > VOLTAGE_MAX_V):
            raise ValidationError(
                f"relaxation voltage outside [{VOLTAGE_MIN_V}, {VOLTAGE_MAX_V}] V"
            )
        if self.sampling_interval_s <= 0:
            raise ValidationError("sampling interval must be positive")
        if self.cutoff_current_a <= 0:
            raise ValidationError("cutoff current must be positive")

    @property
    def n_samples(self) -> int:
        return int(self.times_s.size)

    def truncated(self, n_samples: int) -> "RelaxationCurve":
        """First ``n_samples`` samples (shorter observation of the same rest)."""
        if n_samples < 2:
            raise ValidationError("truncation must keep at least 2 samples")
        if n_samples > self.n_samples:
            raise ValidationError(
                f"truncation to {n_samples} samples exceeds the {self.n_samples} recorded"
            )
        return RelaxationCurve(
            self.times_s[:n_samples],
            self.voltages_v[:n_samples],
            self.sampling_interval_s,
            self.cutoff_current_a,
        )


@dataclass(frozen=True)
class DischargeCurve:
    """Capacity/voltage trace of the CC discharge.

    ``charges_ah`` is the running discharged charge (non-decreasing),
    ``voltages_v`` the terminal voltage (non-increasing), ``duration_s``
    the total CC discharge time.
    """

    charges_ah: np.ndarray
    voltages_v: np.ndarray
    duration_s: float

    def __post_init__(self):
        q = np.asarray(self.charges_ah, dtype=float)
        v = np.asarray(self.voltages_v, dtype=float)
        object.__setattr__(self, "charges_ah", q)
        object.__setattr__(self, "voltages_v", v)
        if q.ndim != 1 or v.ndim != 1 or q.size != v.size:
            raise ValidationError("discharge charges and voltages must be 1-D and equal length")
        if q.size < 2:
            raise ValidationError("discharge curve needs at least 2 points")
        if np.any(np.diff(q) < 0):
            raise ValidationError("discharged charge must be non-decreasing")
        if np.any(np.diff(v) > 0):
            raise ValidationError("discharge voltage must be non-increasing")
        if self.duration_s <= 0:
            raise ValidationError("discharge duration must be positive")

    @property
    def capacity_ah(self) -> float:
        return float(self.charges_ah[-1])


@dataclass(frozen=True)
class CycleRecord:
    """One cycle of one cell: relaxation, optional discharge, bookkeeping."""

    cycle_index: int
    relaxation: RelaxationCurve
    capacity_ah: float
    cumulative_ah: float
    calendar_days: float
    discharge: DischargeCurve | None = None

    def __post_init__(self):
        if self.cycle_index < 1:
            raise ValidationError("cycle index must be a positive integer")
        if self.capacity_ah <= 0:
            raise ValidationError("capacity must be positive")


@dataclass(frozen=True)
class CellHistory:
    """Complete cycling history of one cell, immutable after construction."""

    cell_id: str
    chemistry: Chemistry
    condition: str
    nominal_capacity_ah: float
    cycles: tuple[CycleRecord, ...]
    eol_cycle: int | None
    soh_eol: float = DEFAULT_SOH_EOL

    def __post_init__(self):
        if self.nominal_capacity_ah <= 0:
            raise ValidationError("nominal capacity must be positive")
        parse_condition(self.condition)
        indices = [c.cycle_index for c in self.cycles]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValidationError("cycle indices must be strictly increasing")
        cum = [c.cumulative_ah for c in self.cycles]
        if any(b < a for a, b in zip(cum, cum[1:])):
            raise ValidationError("cumulative throughput must be non-decreasing")

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    def record(self, cycle_index: int) -> CycleRecord:
        for rec in self.cycles:
            if rec.cycle_index == cycle_index:
                return rec
        raise UnknownCycleError(f"cell {self.cell_id} has no cycle {cycle_index}")

    def has_cycle(self, cycle_index: int) -> bool:
        return any(rec.cycle_index == cycle_index for rec in self.cycles)

    def soh(self, cycle_index: int) -> float:
        return self.record(cycle_index).capacity_ah / self.nominal_capacity_ah

    def capacities(self) -> np.ndarray:
        return np.array([rec.capacity_ah for rec in self.cycles])


@dataclass(frozen=True)
class DatasetSplit:
    train: frozenset[str]
    test: frozenset[str]
    seed: int

    def __post_init__(self):
        overlap = self.train & self.test
        if overlap:
            raise ValidationError(f"train and test overlap: {sorted(overlap)}")


@dataclass
class CellSchema:
    """Column mapping plus per-cell metadata needed to ingest one file.

    ``columns`` maps canonical column names to the names used in the file;
    identity by default. Metadata left as ``None`` is read from the file's
    leading comment header when present.
    """

    cell_id: str | None = None
    chemistry: Chemistry | None = None
    condition: str | None = None
    nominal_capacity_ah: float | None = None
    sampling_interval_s: float | None = None
    rest_duration_s: float | None = None
    soh_eol: float = DEFAULT_SOH_EOL
    columns: dict[str, str] = field(default_factory=dict)

    def column(self, canonical: str) -> str:
        return self.columns.get(canonical, canonical)


# ---------------------------------------------------------------------------
# End of life
# ---------------------------------------------------------------------------

def moving_median(values: np.ndarray, window: int = EOL_MEDIAN_WINDOW) -> np.ndarray:
    """Centered moving median; shrinks the window near the edges.

    Sequences shorter than one full window pass through unchanged: an edge
    median over 2-3 points would mask rather than clean a real crossing.
    """
    values = np.asarray(values, dtype=float)
    if values.size < window:
        return values.copy()
    half = window // 2
    out = np.empty_like(values)
    for i in range(values.size):
        lo = max(0, i - half)
        hi = min(values.size, i + half + 1)
        out[i] = np.median(values[lo:hi])
    return out


def compute_eol(
    capacities_ah,
    nominal_capacity_ah: float,
    cycle_indices=None,
    soh_eol: float = DEFAULT_SOH_EOL,
) -> int:
    """First cycle at which smoothed capacity falls to ``soh_eol`` of nominal.

    A centered 5-cycle moving median is applied before threshold detection
    so isolated capacity-measurement spikes cannot trigger retirement.
    """
    caps = np.asarray(capacities_ah, dtype=float)
    if caps.size == 0:
        raise ValidationError("capacity sequence is empty")
    if cycle_indices is None:
        cycle_indices = np.arange(1, caps.size + 1)
    smoothed = moving_median(caps)
    crossed = np.nonzero(smoothed / nominal_capacity_ah <= soh_eol)[0]
    if crossed.size == 0:
        raise NeverReachedError(
            f"capacity never fell to {soh_eol:.0%} of nominal within {caps.size} cycles"
        )
    return int(np.asarray(cycle_indices)[crossed[0]])


def compute_eol_for(history_capacities, nominal, soh_eol=DEFAULT_SOH_EOL):
    """compute_eol variant returning None instead of raising (unlabeled cells)."""
    try:
        return compute_eol(history_capacities, nominal, soh_eol=soh_eol)
    except NeverReachedError:
        return None


# ---------------------------------------------------------------------------
# History assembly (shared by simulation and ingestion)
# ---------------------------------------------------------------------------

def cycle_duration_s(
    capacity_ah: float,
    nominal_capacity_ah: float,
    condition: str,
    rest_duration_s: float,
) -> float:
    """Wall-clock length of one full cycle under the condition's C-rates.

    CC charge + post-charge rest + CC discharge + post-discharge rest; the
    CV charge tail is not modeled.
    """
    _, chg_rate, dis_rate = parse_condition(condition)
    charge_s = capacity_ah / (chg_rate * nominal_capacity_ah) * 3600.0
    discharge_s = capacity_ah / (dis_rate * nominal_capacity_ah) * 3600.0
    return charge_s + discharge_s + 2.0 * rest_duration_s


def build_history(
    cell_id: str,
    chemistry: Chemistry,
    condition: str,
    nominal_capacity_ah: float,
    cycle_data: list[tuple[int, RelaxationCurve, DischargeCurve | None, float]],
    rest_duration_s: float,
    soh_eol: float = DEFAULT_SOH_EOL,
) -> CellHistory:
    """Assemble a CellHistory, deriving throughput, calendar time, and EOL.

    ``cycle_data`` rows are (cycle_index, relaxation, discharge, capacity_ah).
    """
    records: list[CycleRecord] = []
    cumulative = 0.0
    calendar_s = 0.0
    for cycle_index, relaxation, discharge, capacity in cycle_data:
        cumulative += 2.0 * capacity
        records.append(
            CycleRecord(
                cycle_index=cycle_index,
                relaxation=relaxation,
                discharge=discharge,
                capacity_ah=capacity,
                cumulative_ah=cumulative,
                calendar_days=calendar_s / SECONDS_PER_DAY,
            )
        )
        calendar_s += cycle_duration_s(capacity, nominal_capacity_ah, condition, rest_duration_s)
    caps = [r.capacity_ah for r in records]
    eol = compute_eol_for(caps, nominal_capacity_ah, soh_eol)
    if eol is not None:
        # compute_eol indexes positionally; map back onto actual cycle numbers.
        eol = records[eol - 1].cycle_index
    return CellHistory(
        cell_id=cell_id,
        chemistry=chemistry,
        condition=condition,
        nominal_capacity_ah=nominal_capacity_ah,
        cycles=tuple(records),
        eol_cycle=eol,
        soh_eol=soh_eol,
    )


# ---------------------------------------------------------------------------
# CSV ingestion / serialization
# ---------------------------------------------------------------------------

def _parse_header_comment(line: str) -> dict[str, str]:
    meta: dict[str, str] = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, _, value = token.partition("=")
            meta[key] = value
    return meta


def _resample_relaxation(times, voltages, interval_s: float):
    """Snap a rest transient onto the declared uniform grid.

    Samples already on the grid are kept verbatim so canonical files round
    trip exactly; anything else is linearly interpolated.
    """
    times = np.asarray(times, dtype=float)
    voltages = np.asarray(voltages, dtype=float)
    n = int(np.floor(times[-1] / interval_s + 1e-9)) + 1
    grid = np.arange(n) * interval_s
    if times.size == n and np.allclose(times, grid, atol=1e-9, rtol=0.0):
        return times, voltages
    return grid, np.interp(grid, times, voltages)


def ingest_cell(path, schema: CellSchema | None = None) -> CellHistory:
    """Read one cell CSV into a validated CellHistory.

    Raises SchemaError when declared columns are missing or duplicated,
    ValidationError on structural violations, EmptyFileError on a file with
    no data rows.
    """
    path = Path(path)
    schema = schema or CellSchema()
    if not path.exists():
        raise SchemaError(f"no such file: {path}")

    header_meta: dict[str, str] = {}
    with path.open(newline="") as fh:
        pos = fh.tell()
        first = fh.readline()
        while first.startswith("#"):
            header_meta.update(_parse_header_comment(first))
            pos = fh.tell()
            first = fh.readline()
        fh.seek(pos)
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path} has no header row") from None
        rows = [row for row in reader if row]

    if not rows:
        raise EmptyFileError(f"{path} has no data rows")

    col_index: dict[str, int] = {}
    for canonical in CANONICAL_COLUMNS:
        name = schema.column(canonical)
        hits = [i for i, c in enumerate(columns) if c == name]
        if len(hits) == 0:
            raise SchemaError(f"{path}: missing column {name!r} (for {canonical!r})")
        if len(hits) > 1:
            raise SchemaError(f"{path}: duplicated column {name!r}")
        col_index[canonical] = hits[0]

    def meta(field_name: str, header_key: str, parser):
        explicit = getattr(schema, field_name)
        if explicit is not None:
            return explicit
        if header_key in header_meta:
            return parser(header_meta[header_key])
        raise SchemaError(
            f"{path}: {field_name} not in schema and no {header_key!r} header present"
        )

    cell_id = meta("cell_id", "cell_id", str)
    chemistry = meta("chemistry", "chemistry", Chemistry.parse)
    condition = meta("condition", "condition", str)
    nominal = meta("nominal_capacity_ah", "nominal_capacity_ah", float)
    interval = meta("sampling_interval_s", "sampling_interval_s", float)
    rest_duration = meta("rest_duration_s", "rest_duration_s", float)
    cutoff_current = CUTOFF_C_RATE * nominal

    per_cycle: dict[int, dict[str, list]] = {}
    for row in rows:
        try:
            cycle = int(row[col_index["cycle"]])
            phase = row[col_index["phase"]]
            t_s = float(row[col_index["t_s"]])
            v = float(row[col_index["voltage_v"]])
            q = float(row[col_index["capacity_ah"]])
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}: unparseable row {row!r}") from exc
        if phase not in PHASES:
            raise ValidationError(f"{path}: unknown phase {phase!r}")
        bucket = per_cycle.setdefault(cycle, {"rest_t": [], "rest_v": [], "rest_q": [],
                                              "dis_t": [], "dis_v": [], "dis_q": []})
        if phase == "rest_post_charge":
            bucket["rest_t"].append(t_s)
            bucket["rest_v"].append(v)
            bucket["rest_q"].append(q)
        elif phase == "discharge":
            bucket["dis_t"].append(t_s)
            bucket["dis_v"].append(v)
            bucket["dis_q"].append(q)
        # charge / rest_post_discharge rows are tolerated and skipped

    cycle_data = []
    for cycle in sorted(per_cycle):
        bucket = per_cycle[cycle]
        if not bucket["rest_t"]:
            raise ValidationError(f"{path}: cycle {cycle} has no rest_post_charge rows")
        order = np.argsort(bucket["rest_t"], kind="stable")
        rest_t = np.asarray(bucket["rest_t"])[order]
        rest_v = np.asarray(bucket["rest_v"])[order]
        if np.any(np.diff(rest_t) <= 0):
            raise ValidationError(f"{path}: cycle {cycle} rest times not strictly increasing")
        rest_t, rest_v = _resample_relaxation(rest_t, rest_v, interval)
        expected = int(np.floor(rest_duration / interval + 1e-9)) + 1
        if rest_t.size < expected:
            raise ValidationError(
                f"{path}: cycle {cycle} rest has {rest_t.size} samples; the declared "
                f"{rest_duration:g} s rest at {interval:g} s spacing requires {expected}"
            )
        relaxation = RelaxationCurve(rest_t, rest_v, interval, cutoff_current)

        discharge = None
        if bucket["dis_t"]:
            order = np.argsort(bucket["dis_t"], kind="stable")
            dis_q = np.asarray(bucket["dis_q"])[order]
            dis_v = np.asarray(bucket["dis_v"])[order]
            duration = float(np.asarray(bucket["dis_t"])[order][-1])
            discharge = DischargeCurve(dis_q, dis_v, duration)

        capacity = float(bucket["rest_q"][0]) if bucket["rest_q"] else 0.0
        if capacity <= 0.0 and discharge is not None:
            capacity = discharge.capacity_ah
        if capacity <= 0.0:
            raise ValidationError(f"{path}: cycle {cycle} carries no positive capacity")
        cycle_data.append((cycle, relaxation, discharge, capacity))

    return build_history(
        cell_id=cell_id,
        chemistry=chemistry,
        condition=condition,
        nominal_capacity_ah=nominal,
        cycle_data=cycle_data,
        rest_duration_s=rest_duration,
        soh_eol=schema.soh_eol,
    )


def write_cell(history: CellHistory, path, header_comment: str | None = None) -> None:
    """Serialize a CellHistory in the canonical CSV layout.

    Floats are written with repr so a write/ingest round trip reproduces
    every field bit for bit.
    """
    path = Path(path)
    rest_duration = float(history.cycles[0].relaxation.times_s[-1])
    interval = history.cycles[0].relaxation.sampling_interval_s
    cutoff = history.cycles[0].relaxation.cutoff_current_a
    meta = (
        f"kind=cell cell_id={history.cell_id} chemistry={history.chemistry.value} "
        f"condition={history.condition} nominal_capacity_ah={history.nominal_capacity_ah!r} "
        f"sampling_interval_s={interval!r} rest_duration_s={rest_duration!r}"
    )
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment} {meta}\n")
    else:
        buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CANONICAL_COLUMNS)
    for rec in history.cycles:
        rel = rec.relaxation
        for i in range(rel.n_samples):
            current = cutoff if rel.times_s[i] == 0.0 else 0.0
            writer.writerow([
                rec.cycle_index, "rest_post_charge",
                repr(float(rel.times_s[i])), repr(float(rel.voltages_v[i])),
                repr(float(current)), repr(float(rec.capacity_ah)),
            ])
        if rec.discharge is not None:
            dis = rec.discharge
            _, _, dis_rate = parse_condition(history.condition)
            current = -dis_rate * history.nominal_capacity_ah
            n = dis.charges_ah.size
            for i in range(n):
                t_s = dis.duration_s * (i / (n - 1))
                writer.writerow([
                    rec.cycle_index, "discharge",
                    repr(float(t_s)), repr(float(dis.voltages_v[i])),
                    repr(float(current)), repr(float(dis.charges_ah[i])),
                ])
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    cell_id: str
    path: str
    chemistry: Chemistry
    condition: str
    nominal_capacity_ah: float
    sampling_interval_s: float
    rest_duration_s: float

    def schema(self) -> CellSchema:
        return CellSchema(
            cell_id=self.cell_id,
            chemistry=self.chemistry,
            condition=self.condition,
            nominal_capacity_ah=self.nominal_capacity_ah,
            sampling_interval_s=self.sampling_interval_s,
            rest_duration_s=self.rest_duration_s,
        )


def write_manifest(entries: list[ManifestEntry], path, header_comment: str | None = None) -> None:
    path = Path(path)
    lines = []
    if header_comment:
        lines.append(f"# {header_comment} kind=manifest")
    else:
        lines.append("# kind=manifest")
    for e in entries:
        cid = e.cell_id
        lines.append(f"cell.{cid}.path = {e.path}")
        lines.append(f"cell.{cid}.chemistry = {e.chemistry.value}")
        lines.append(f"cell.{cid}.condition = {e.condition}")
        lines.append(f"cell.{cid}.nominal_capacity_ah = {e.nominal_capacity_ah!r}")
        lines.append(f"cell.{cid}.sampling_interval_s = {e.sampling_interval_s!r}")
        lines.append(f"cell.{cid}.rest_duration_s = {e.rest_duration_s!r}")
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such manifest: {path}")
    fields: dict[str, dict[str, str]] = {}
    order: list[str] = []
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{path}: manifest line without '=': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key.startswith("cell."):
            continue
        _, _, rest = key.partition(".")
        cell_id, _, attr = rest.rpartition(".")
        if not cell_id or not attr:
            raise SchemaError(f"{path}: malformed manifest key {key!r}")
        if cell_id not in fields:
            fields[cell_id] = {}
            order.append(cell_id)
        fields[cell_id][attr] = value

    entries = []
    required = ("path", "chemistry", "condition", "nominal_capacity_ah",
                "sampling_interval_s", "rest_duration_s")
    for cell_id in order:
        attrs = fields[cell_id]
        missing = [r for r in required if r not in attrs]
        if missing:
            raise SchemaError(f"{path}: cell {cell_id} missing manifest keys {missing}")
        entries.append(ManifestEntry(
            cell_id=cell_id,
            path=attrs["path"],
            chemistry=Chemistry.parse(attrs["chemistry"]),
            condition=attrs["condition"],
            nominal_capacity_ah=float(attrs["nominal_capacity_ah"]),
            sampling_interval_s=float(attrs["sampling_interval_s"]),
            rest_duration_s=float(attrs["rest_duration_s"]),
        ))
    return entries


def ingest_manifest(path, soh_eol: float = DEFAULT_SOH_EOL) -> list[CellHistory]:
    """Load every cell listed in a manifest (paths relative to the manifest)."""
    path = Path(path)
    cells = []
    for entry in read_manifest(path):
        schema = entry.schema()
        schema.soh_eol = soh_eol
        cells.append(ingest_cell(path.parent / entry.path, schema))
    return cells


# ---------------------------------------------------------------------------
# Train/test splitting
# ---------------------------------------------------------------------------

def split_dataset(
    cells: list[CellHistory],
    spec: dict[str, tuple[int, int]],
    seed: int,
) -> DatasetSplit:
    """Seeded per-condition train/test split with exact requested counts.

    ``spec`` maps condition code to (n_train, n_test); conditions without
    an entry contribute no cells to either side.
    """
    by_condition: dict[str, list[str]] = {}
    for cell in cells:
        by_condition.setdefault(cell.condition, []).append(cell.cell_id)

    train: set[str] = set()
    test: set[str] = set()
    for condition in sorted(spec):
        n_train, n_test = spec[condition]
        available = sorted(by_condition.get(condition, []))
        if n_train + n_test > len(available):
            raise InsufficientCellsError(
                f"condition {condition}: requested {n_train}+{n_test} cells, "
                f"only {len(available)} available"
            )
        rng = random.Random(f"{seed}:{condition}")
        rng.shuffle(available)
        train.update(available[:n_train])
        test.update(available[n_train:n_train + n_test])
    return DatasetSplit(train=frozenset(train), test=frozenset(test), seed=seed)


def fingerprint(config: dict) -> str:
    """Short stable hash of a configuration mapping."""
    text = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(text.encode()).hexdigest()[:12]
