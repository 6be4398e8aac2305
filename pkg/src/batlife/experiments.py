"""Evaluation metrics, experiment drivers, and report files.

Three experiment drivers cover the study designs the library exists for:

* ``run_rul_experiment`` - remaining-useful-life regression with mixed
  operating conditions pooled per chemistry, reported per condition;
* ``run_truncation_sweep`` - the same regression repeated with the
  relaxation transient truncated to fewer samples (shorter rest
  observation);
* ``run_classification_experiment`` - three-way life classification
  trained on an aging-stage window of cycles around a test cycle.

Every report stores its per-sample predictions; all metric tables are
derived from those rows by ``recompute_metrics``, which makes reports
self-verifying: re-reading a report directory and recomputing must
reproduce the stored metrics exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import CellHistory, Chemistry, DatasetSplit, fingerprint
from .errors import (
    EmptyInputError,
    EmptyWindowError,
    LengthMismatchError,
    SchemaError,
    ValidationError,
    ZeroEolError,
)
from .features import FEATURE_NAMES, FeatureSet, FeatureVector, WindowMode, WindowSpec, assemble
from .gpc import (
    GpcTrainConfig,
    LifetimeLabel,
    NCA_POLICY,
    NCM_POLICY,
    ThresholdPolicy,
    classify,
    label_sample,
    threshold,
    train_dag,
)
from .gpr import (
    GprTrainConfig,
    inverse_relative_importance,
    predict,
    relative_importance,
    train,
)

ALL = "ALL"


def header_comment(fp: str, kind: str = "report") -> str:
    return f"batlife v{__version__} fingerprint={fp} kind={kind}"


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def rmse(y, y_hat) -> float:
    """Root-mean-square error between observed and predicted values."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.size != y_hat.size:
        raise LengthMismatchError(f"lengths differ: {y.size} vs {y_hat.size}")
    if y.size == 0:
        raise EmptyInputError("rmse of an empty sample set")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mape(y, y_hat, eol) -> float:
    """Mean absolute percentage error with the end-of-life cycle as denominator.

    Normalizing by each sample's observed EOL (not its remaining life)
    keeps late-life samples, whose remaining life approaches zero, from
    dominating the percentage.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    eol = np.asarray(eol, dtype=float)
    if not (y.size == y_hat.size == eol.size):
        raise LengthMismatchError(
            f"lengths differ: {y.size}, {y_hat.size}, {eol.size}"
        )
    if y.size == 0:
        raise EmptyInputError("mape of an empty sample set")
    if np.any(eol <= 0):
        raise ZeroEolError("every end-of-life denominator must be positive")
    return float(np.mean(np.abs(y - y_hat) / eol) * 100.0)


# ---------------------------------------------------------------------------
# Sample construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RulSample:
    features: FeatureVector
    rul: float
    soh: float
    condition: str
    chemistry: Chemistry
    cell_id: str
    cycle: int
    eol: int

    def __post_init__(self):
        if self.rul < 0:
            raise ValidationError("remaining life cannot be negative")
        if not (0.0 < self.soh <= 1.2):
            raise ValidationError(f"state of health {self.soh:.3f} outside (0, 1.2]")


def build_rul_samples(
    cells: dict[str, CellHistory],
    ids,
    feature_set: FeatureSet,
    window: WindowSpec,
    truncate: int | None,
    stride: int,
    soh_floor: float,
    caches: dict[str, dict],
) -> list[RulSample]:
    """Labeled regression samples for the chosen cells, in deterministic order.

    Cells that never reach end of life carry no supervised target and are
    skipped. Samples at or below the retirement threshold are excluded.
    """
    samples: list[RulSample] = []
    for cell_id in sorted(ids):
        history = cells[cell_id]
        if history.eol_cycle is None:
            continue
        cache = caches.setdefault(cell_id, {})
        if window.mode is WindowMode.ADJACENT:
            start = history.cycles[0].cycle_index + 1
        else:
            start = window.reference_cycle + 1
            if not history.has_cycle(window.reference_cycle):
                continue
        for m in range(start, history.eol_cycle + 1, stride):
            if not history.has_cycle(m):
                continue
            soh = history.soh(m)
            if soh <= soh_floor:
                continue
            fv = assemble(history, m, window, feature_set,
                          truncate=truncate, fit_cache=cache)
            samples.append(RulSample(
                features=fv,
                rul=float(history.eol_cycle - m),
                soh=soh,
                condition=history.condition,
                chemistry=history.chemistry,
                cell_id=cell_id,
                cycle=m,
                eol=history.eol_cycle,
            ))
    return samples


def build_classification_samples(
    cells: dict[str, CellHistory],
    ids,
    feature_set: FeatureSet,
    test_cycle: int,
    window_cycles: int,
    policy: ThresholdPolicy,
    stride: int,
    soh_floor: float,
    caches: dict[str, dict],
) -> list[tuple[RulSample, LifetimeLabel]]:
    """Adjacent-cycle samples within the aging-stage window, with labels.

    The window spans [test_cycle - window/2, test_cycle + window/2]; labels
    come from the SOH-scaled thresholds evaluated at each sample's own SOH.
    """
    window = WindowSpec(mode=WindowMode.ADJACENT)
    lo = test_cycle - window_cycles // 2
    hi = test_cycle + window_cycles // 2
    out: list[tuple[RulSample, LifetimeLabel]] = []
    for cell_id in sorted(ids):
        history = cells[cell_id]
        if history.eol_cycle is None:
            continue
        cache = caches.setdefault(cell_id, {})
        for m in range(max(lo, 2), hi + 1, stride):
            if m > history.eol_cycle:
                break
            if not (history.has_cycle(m) and history.has_cycle(m - 1)):
                continue
            soh = history.soh(m)
            if soh <= soh_floor:
                continue
            rul = float(history.eol_cycle - m)
            label = label_sample(rul, threshold(policy, soh))
            fv = assemble(history, m, window, feature_set, fit_cache=cache)
            out.append((
                RulSample(
                    features=fv, rul=rul, soh=soh,
                    condition=history.condition, chemistry=history.chemistry,
                    cell_id=cell_id, cycle=m, eol=history.eol_cycle,
                ),
                label,
            ))
    return out


def _matrix(samples: list[RulSample]) -> np.ndarray:
    return np.vstack([s.features.as_array() for s in samples])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    kind: str
    fingerprint: str
    config: dict[str, str]
    tables: dict[str, list[dict]] = field(default_factory=dict)

    def write(self, outdir) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        comment = header_comment(self.fingerprint, kind=self.kind)
        for name, rows in self.tables.items():
            if not rows:
                continue
            buf = io.StringIO()
            buf.write(f"# {comment} table={name}\n")
            writer = csv.writer(buf, lineterminator="\n")
            columns = list(rows[0].keys())
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(row[c]) for c in columns])
            (outdir / f"{name}.csv").write_text(buf.getvalue())
        lines = [f"# {comment}", f"kind = {self.kind}", f"fingerprint = {self.fingerprint}"]
        for key in sorted(self.config):
            lines.append(f"config.{key} = {self.config[key]}")
        for row in self.tables.get("metrics", []):
            tag = ".".join(
                str(row[k]) for k in row if k not in ("rmse_cycles", "mape_pct",
                                                      "accuracy_pct", "n_samples")
            )
            for metric in ("rmse_cycles", "mape_pct", "accuracy_pct"):
                if metric in row:
                    lines.append(f"metric.{tag}.{metric} = {row[metric]!r}")
        (outdir / "summary.txt").write_text("\n".join(lines) + "\n")


def _format_cell(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_report(outdir) -> ExperimentReport:
    outdir = Path(outdir)
    summary = outdir / "summary.txt"
    if not summary.exists():
        raise SchemaError(f"{outdir} has no summary.txt")
    kind = ""
    fp = ""
    config: dict[str, str] = {}
    for raw in summary.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "kind":
            kind = value
        elif key == "fingerprint":
            fp = value
        elif key.startswith("config."):
            config[key.removeprefix("config.")] = value
    tables: dict[str, list[dict]] = {}
    for path in sorted(outdir.glob("*.csv")):
        with path.open(newline="") as fh:
            pos = fh.tell()
            line = fh.readline()
            while line.startswith("#"):
                pos = fh.tell()
                line = fh.readline()
            fh.seek(pos)
            reader = csv.DictReader(fh)
            tables[path.stem] = [
                {k: _parse_cell(v) for k, v in row.items()} for row in reader
            ]
    return ExperimentReport(kind=kind, fingerprint=fp, config=config, tables=tables)


# ---------------------------------------------------------------------------
# Metric derivation (single source for runners and verification)
# ---------------------------------------------------------------------------

def _group_rows(rows: list[dict], keys: tuple[str, ...]) -> dict[tuple, list[dict]]:
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault(tuple(row[k] for k in keys), []).append(row)
    return grouped


def _rul_metric_rows(predictions: list[dict], extra_keys: tuple[str, ...] = ()) -> list[dict]:
    metric_rows: list[dict] = []
    for scope_keys in (
        extra_keys + ("feature_set", "chemistry", "condition"),
        extra_keys + ("feature_set", "chemistry"),
        extra_keys + ("feature_set",),
    ):
        for scope, rows in _group_rows(predictions, scope_keys).items():
            entry = dict(zip(scope_keys, scope))
            entry.setdefault("chemistry", ALL)
            entry.setdefault("condition", ALL)
            y = [r["rul_observed"] for r in rows]
            y_hat = [r["rul_predicted"] for r in rows]
            eol = [r["eol_cycles"] for r in rows]
            metric_rows.append({
                **{k: entry[k] for k in extra_keys},
                "feature_set": entry["feature_set"],
                "chemistry": entry["chemistry"],
                "condition": entry["condition"],
                "n_samples": len(rows),
                "rmse_cycles": rmse(y, y_hat),
                "mape_pct": mape(y, y_hat, eol),
            })
    return metric_rows


def _classification_metric_rows(predictions: list[dict]) -> list[dict]:
    metric_rows: list[dict] = []
    for scope_keys in (("feature_set", "condition"), ("feature_set",)):
        for scope, rows in _group_rows(predictions, scope_keys).items():
            entry = dict(zip(scope_keys, scope))
            entry.setdefault("condition", ALL)
            correct = [r["correct"] for r in rows]
            metric_rows.append({
                "feature_set": entry["feature_set"],
                "condition": entry["condition"],
                "n_samples": len(rows),
                "accuracy_pct": 100.0 * float(np.mean(correct)),
            })
    return metric_rows


def _confusion_rows(predictions: list[dict]) -> list[dict]:
    rows: list[dict] = []
    labels = [l.value for l in LifetimeLabel]
    for (feature_set,), preds in _group_rows(predictions, ("feature_set",)).items():
        counts = {(a, b): 0 for a in labels for b in labels}
        for row in preds:
            counts[(row["label_observed"], row["label_predicted"])] += 1
        for observed in labels:
            for predicted in labels:
                rows.append({
                    "feature_set": feature_set,
                    "observed": observed,
                    "predicted": predicted,
                    "count": counts[(observed, predicted)],
                })
    return rows


def recompute_metrics(report: ExperimentReport) -> list[dict]:
    """Re-derive the metrics table from the stored per-sample predictions."""
    predictions = report.tables.get("predictions", [])
    if report.kind == "rul":
        return _rul_metric_rows(predictions)
    if report.kind == "truncation":
        return _rul_metric_rows(predictions, extra_keys=("relax_samples",))
    if report.kind == "classification":
        return _classification_metric_rows(predictions)
    raise ValidationError(f"unknown report kind {report.kind!r}")


def verify_report(report: ExperimentReport) -> bool:
    """True when the stored metrics match a recomputation from predictions."""
    return recompute_metrics(report) == report.tables.get("metrics", [])


# ---------------------------------------------------------------------------
# Experiment configurations
# ---------------------------------------------------------------------------

@dataclass
class RulExperimentConfig:
    feature_sets: tuple[FeatureSet, ...] = (FeatureSet.NOVEL_PRED,)
    window_start: int = 1
    truncate: int | None = None
    stride: int = 1
    soh_floor: float = 0.8
    seed: int = 0
    restarts: int = 5
    max_iters: int = 500

    def window(self) -> WindowSpec:
        return WindowSpec(mode=WindowMode.FIXED_REFERENCE, reference_cycle=self.window_start)

    def gpr_config(self) -> GprTrainConfig:
        return GprTrainConfig(restarts=self.restarts, max_iters=self.max_iters, seed=self.seed)

    def to_dict(self) -> dict[str, str]:
        return {
            "experiment": "rul",
            "feature_sets": ",".join(fs.value for fs in self.feature_sets),
            "window_start": str(self.window_start),
            "truncate": "full" if self.truncate is None else str(self.truncate),
            "stride": str(self.stride),
            "soh_floor": repr(self.soh_floor),
            "seed": str(self.seed),
            "restarts": str(self.restarts),
            "max_iters": str(self.max_iters),
        }


@dataclass
class ClassificationConfig:
    feature_sets: tuple[FeatureSet, ...] = (FeatureSet.NOVEL_CLASS,)
    chemistry: Chemistry = Chemistry.NCA
    test_cycle: int = 100
    window_cycles: int = 100
    policy: ThresholdPolicy | None = None
    stride: int = 1
    soh_floor: float = 0.8
    seed: int = 0
    restarts: int = 3
    max_iters: int = 200
    allow_ncm_nca: bool = False

    def resolved_policy(self) -> ThresholdPolicy:
        if self.policy is not None:
            return self.policy
        return NCM_POLICY if self.chemistry is Chemistry.NCM else NCA_POLICY

    def gpc_config(self) -> GpcTrainConfig:
        return GpcTrainConfig(restarts=self.restarts, max_iters=self.max_iters, seed=self.seed)

    def to_dict(self) -> dict[str, str]:
        policy = self.resolved_policy()
        return {
            "experiment": "classification",
            "feature_sets": ",".join(fs.value for fs in self.feature_sets),
            "chemistry": self.chemistry.value,
            "test_cycle": str(self.test_cycle),
            "window_cycles": str(self.window_cycles),
            "policy_upper": repr(policy.upper_at_soh1),
            "policy_lower": repr(policy.lower_at_soh1),
            "stride": str(self.stride),
            "soh_floor": repr(self.soh_floor),
            "seed": str(self.seed),
            "restarts": str(self.restarts),
            "max_iters": str(self.max_iters),
        }


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def _cells_by_id(cells: list[CellHistory]) -> dict[str, CellHistory]:
    return {c.cell_id: c for c in cells}


def run_rul_experiment(
    cells: list[CellHistory],
    split: DatasetSplit,
    config: RulExperimentConfig,
    caches: dict[str, dict] | None = None,
) -> ExperimentReport:
    """Mixed-condition regression: one model per chemistry, pooled conditions.

    Per-condition metrics come from filtering test samples after pooled
    training, and all metrics pool samples (they are not per-cell averages).
    """
    by_id = _cells_by_id(cells)
    chemistries = sorted({c.chemistry for c in cells}, key=lambda ch: ch.value)
    caches = {} if caches is None else caches
    window = config.window()

    predictions: list[dict] = []
    importance_rows: list[dict] = []
    for feature_set in config.feature_sets:
        for chemistry in chemistries:
            train_ids = [cid for cid in split.train
                         if by_id[cid].chemistry is chemistry]
            test_ids = [cid for cid in split.test
                        if by_id[cid].chemistry is chemistry]
            if not train_ids or not test_ids:
                continue
            train_samples = build_rul_samples(
                by_id, train_ids, feature_set, window, config.truncate,
                config.stride, config.soh_floor, caches,
            )
            test_samples = build_rul_samples(
                by_id, test_ids, feature_set, window, config.truncate,
                config.stride, config.soh_floor, caches,
            )
            if not train_samples or not test_samples:
                continue
            names = FEATURE_NAMES[feature_set]
            model = train(
                _matrix(train_samples),
                np.array([s.rul for s in train_samples]),
                config.gpr_config(),
                feature_names=names,
            )
            mean, variance = predict(model, _matrix(test_samples))
            for sample, mu, var in zip(test_samples, mean, variance):
                predictions.append({
                    "feature_set": feature_set.value,
                    "chemistry": chemistry.value,
                    "condition": sample.condition,
                    "cell_id": sample.cell_id,
                    "cycle": sample.cycle,
                    "soh": sample.soh,
                    "eol_cycles": sample.eol,
                    "rul_observed": sample.rul,
                    "rul_predicted": float(mu),
                    "rul_predicted_var": float(var),
                })
            weights = relative_importance(model)
            inverse = inverse_relative_importance(model)
            for name, ls, w, wi in zip(names, model.kernel.length_scales, weights, inverse):
                importance_rows.append({
                    "feature_set": feature_set.value,
                    "chemistry": chemistry.value,
                    "feature": name,
                    "length_scale": float(ls),
                    "weight_by_length_scale": float(w),
                    "weight_by_inverse_length_scale": float(wi),
                })
    if not predictions:
        raise EmptyInputError("experiment produced no test predictions")

    cfg = config.to_dict()
    report = ExperimentReport(
        kind="rul",
        fingerprint=fingerprint(cfg),
        config=cfg,
        tables={"predictions": predictions, "importance": importance_rows},
    )
    report.tables["metrics"] = recompute_metrics(report)
    return report


def run_truncation_sweep(
    cells: list[CellHistory],
    split: DatasetSplit,
    config: RulExperimentConfig,
    sample_counts: list[int | None],
) -> ExperimentReport:
    """Repeat the regression at several relaxation lengths.

    ``sample_counts`` entries are retained sample counts (None = the full
    transient). The reported relaxation time follows the sampling-budget
    convention count * interval.
    """
    for count in sample_counts:
        if count is not None and count < 6:
            raise ValidationError("truncation below 6 samples cannot support the circuit fit")
    caches: dict[str, dict] = {}
    predictions: list[dict] = []
    importance_rows: list[dict] = []
    interval = cells[0].cycles[0].relaxation.sampling_interval_s if cells else 0.0
    full_count = cells[0].cycles[0].relaxation.n_samples if cells else 0
    for count in sample_counts:
        sub_config = RulExperimentConfig(
            feature_sets=config.feature_sets,
            window_start=config.window_start,
            truncate=count,
            stride=config.stride,
            soh_floor=config.soh_floor,
            seed=config.seed,
            restarts=config.restarts,
            max_iters=config.max_iters,
        )
        sub_report = run_rul_experiment(cells, split, sub_config, caches=caches)
        retained = full_count if count is None else count
        for row in sub_report.tables["predictions"]:
            predictions.append({"relax_samples": retained, **row})
        for row in sub_report.tables["importance"]:
            importance_rows.append({"relax_samples": retained, **row})

    cfg = config.to_dict()
    cfg["experiment"] = "truncation"
    cfg["sample_counts"] = ",".join(
        "full" if c is None else str(c) for c in sample_counts
    )
    report = ExperimentReport(
        kind="truncation",
        fingerprint=fingerprint(cfg),
        config=cfg,
        tables={"predictions": predictions, "importance": importance_rows},
    )
    report.tables["metrics"] = recompute_metrics(report)
    rows = []
    for row in report.tables["metrics"]:
        if row["chemistry"] == ALL and row["condition"] == ALL:
            rows.append({
                "feature_set": row["feature_set"],
                "relax_samples": row["relax_samples"],
                "relaxation_time_s": row["relax_samples"] * interval,
                "rmse_cycles": row["rmse_cycles"],
                "mape_pct": row["mape_pct"],
            })
    report.tables["sweep"] = rows
    return report


def run_classification_experiment(
    cells: list[CellHistory],
    split: DatasetSplit,
    config: ClassificationConfig,
) -> ExperimentReport:
    """Aging-stage-windowed three-way classification for one chemistry.

    Training and evaluation both draw samples from the cycle window around
    the test cycle (training cells train the DAG, test cells are routed
    through it); the predictions table doubles as the per-SOH probability
    scatter since each row carries (soh, probability, correct).
    """
    if config.chemistry is Chemistry.NCM_NCA and not config.allow_ncm_nca:
        raise ValidationError(
            "NCM+NCA cells are excluded from life classification by default; "
            "set allow_ncm_nca to override"
        )
    by_id = _cells_by_id(cells)
    policy = config.resolved_policy()
    caches: dict[str, dict] = {}

    train_ids = [cid for cid in split.train if by_id[cid].chemistry is config.chemistry]
    test_ids = [cid for cid in split.test if by_id[cid].chemistry is config.chemistry]

    predictions: list[dict] = []
    for feature_set in config.feature_sets:
        train_pairs = build_classification_samples(
            by_id, train_ids, feature_set, config.test_cycle, config.window_cycles,
            policy, config.stride, config.soh_floor, caches,
        )
        if not train_pairs:
            raise EmptyWindowError(
                f"no training samples in cycles "
                f"[{config.test_cycle - config.window_cycles // 2}, "
                f"{config.test_cycle + config.window_cycles // 2}]"
            )
        test_pairs = build_classification_samples(
            by_id, test_ids, feature_set, config.test_cycle, config.window_cycles,
            policy, config.stride, config.soh_floor, caches,
        )
        X = np.vstack([s.features.as_array() for s, _ in train_pairs])
        labels = [label for _, label in train_pairs]
        dag = train_dag(X, labels, config.gpc_config(),
                        feature_names=FEATURE_NAMES[feature_set])
        for sample, observed in test_pairs:
            predicted, probability = classify(dag, sample.features.as_array())
            predictions.append({
                "feature_set": feature_set.value,
                "condition": sample.condition,
                "cell_id": sample.cell_id,
                "cycle": sample.cycle,
                "soh": sample.soh,
                "rul_observed": sample.rul,
                "label_observed": observed.value,
                "label_predicted": predicted.value,
                "probability": float(probability),
                "correct": int(predicted is observed),
            })
    if not predictions:
        raise EmptyInputError("classification produced no test predictions")

    cfg = config.to_dict()
    report = ExperimentReport(
        kind="classification",
        fingerprint=fingerprint(cfg),
        config=cfg,
        tables={"predictions": predictions},
    )
    report.tables["metrics"] = recompute_metrics(report)
    report.tables["confusion"] = _confusion_rows(predictions)
    return report
