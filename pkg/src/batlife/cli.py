"""Command-line frontend: ingest/simulate -> features -> train -> report.

Every flag that takes a quantity states its unit in ``--help``. Flags may
also be supplied through ``--config FILE`` (plain ``key = value`` lines,
keys matching flag names with dashes replaced by underscores); explicit
flags override the file. All output files begin with a comment line
carrying the tool version and the fingerprint of the fully resolved
configuration, and identical configurations produce identical files.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, ecm, modelio, simgen
from .dataset import (
    Chemistry,
    ManifestEntry,
    fingerprint,
    ingest_manifest,
    split_dataset,
    write_cell,
    write_manifest,
)
from .errors import DataError, NumericalError, ValidationError
from .experiments import (
    ClassificationConfig,
    RulExperimentConfig,
    build_rul_samples,
    header_comment,
    read_report,
    recompute_metrics,
    run_classification_experiment,
    run_rul_experiment,
    run_truncation_sweep,
    verify_report,
)
from .features import FEATURE_NAMES, FeatureSet, WindowMode, WindowSpec, assemble
from .gpc import NCA_POLICY, NCM_POLICY, classify as dag_classify, train_dag
from .gpr import predict as gpr_predict, train as gpr_train

OUTPUT_DIR_ENV = "BATLIFE_OUT"


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    file = Path(path)
    if not file.exists():
        raise ValidationError(f"no such config file: {path}")
    values: dict[str, str] = {}
    for raw in file.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line without '=': {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


class _Resolver:
    """Merge CLI flags over config-file values over defaults."""

    def __init__(self, args: argparse.Namespace):
        self.file_values = _read_config_file(getattr(args, "config", None))
        self.args = args
        self.resolved: dict[str, str] = {}

    def get(self, name: str, default, parser=str):
        flag = getattr(self.args, name, None)
        if flag is not None:
            value = flag
        elif name in self.file_values:
            value = parser(self.file_values[name])
        else:
            value = default
        if value is not None:
            self.resolved[name] = str(value)
        return value

    def flag(self, name: str) -> bool:
        if getattr(self.args, name, False):
            self.resolved[name] = "true"
            return True
        value = self.file_values.get(name, "false").lower() in ("1", "true", "yes")
        if value:
            self.resolved[name] = "true"
        return value

    def fingerprint(self, command: str) -> str:
        return fingerprint({"command": command, **self.resolved})


def _out_path(value: str | None, default_name: str) -> Path:
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    if value is None:
        return base / default_name
    path = Path(value)
    return path if path.is_absolute() or value.startswith(".") else base / path


def _feature_sets(text: str) -> tuple[FeatureSet, ...]:
    return tuple(FeatureSet.parse(tok) for tok in text.split(",") if tok.strip())


def _parse_split(text: str, cells) -> dict[str, tuple[int, int]]:
    """Split spec: 'auto' (half/half per condition), 'T/E' for every
    condition, or 'COND=T/E,COND=T/E' per condition."""
    conditions = sorted({c.condition for c in cells})
    counts = {cond: sum(1 for c in cells if c.condition == cond) for cond in conditions}
    if text == "auto":
        return {cond: ((n + 1) // 2, n // 2) for cond, n in counts.items()}
    if "=" not in text:
        n_train, _, n_test = text.partition("/")
        return {cond: (int(n_train), int(n_test)) for cond in conditions}
    spec = {}
    for part in text.split(","):
        cond, _, frac = part.partition("=")
        n_train, _, n_test = frac.partition("/")
        spec[cond.strip()] = (int(n_train), int(n_test))
    return spec


def _write_csv(path: Path, comment: str, columns: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _fmt(value) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    res = _Resolver(args)
    cells_per_condition = res.get("cells", 5, int)
    conditions = res.get("conditions", 3, int)
    seed = res.get("seed", 7, int)
    noise_mv = res.get("noise_mv", 0.2, float)
    spread = res.get("spread", 0.02, float)
    fade_refs_text = res.get("fade_refs", None)
    discharge_knots = res.get("discharge_knots", 1000, int)
    outdir = Path(res.get("out", str(_out_path(None, "synthetic"))))
    fp = res.fingerprint("simulate")

    if fade_refs_text:
        refs = tuple(float(tok) for tok in fade_refs_text.split(","))[:conditions]
    else:
        refs = (300.0, 500.0, 800.0, 400.0, 650.0, 950.0)[:conditions]
    temps = (25, 35, 45, 30, 40, 50)[:conditions]
    cells = simgen.benchmark_fleet(
        seed=seed, cells_per_condition=cells_per_condition,
        fade_refs=refs, temperatures=temps,
        noise_sigma_v=noise_mv * 1e-3, cell_spread=spread,
        discharge_knots=discharge_knots,
    )
    comment = header_comment(fp, kind="cell")
    cell_dir = outdir / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for cell in cells:
        rel = cell.cycles[0].relaxation
        write_cell(cell, cell_dir / f"{cell.cell_id}.csv", header_comment=comment)
        entries.append(ManifestEntry(
            cell_id=cell.cell_id,
            path=f"cells/{cell.cell_id}.csv",
            chemistry=cell.chemistry,
            condition=cell.condition,
            nominal_capacity_ah=cell.nominal_capacity_ah,
            sampling_interval_s=rel.sampling_interval_s,
            rest_duration_s=float(rel.times_s[-1]),
        ))
    write_manifest(entries, outdir / "manifest.txt",
                   header_comment=header_comment(fp, kind="manifest"))
    print(f"wrote {len(cells)} cells under {outdir} (fingerprint {fp})")
    return 0


def cmd_ingest(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    if manifest is None:
        raise ValidationError("--manifest is required")
    cells = ingest_manifest(manifest)
    for cell in cells:
        eol = cell.eol_cycle if cell.eol_cycle is not None else "never"
        print(f"{cell.cell_id}: {cell.chemistry.value} {cell.condition} "
              f"{cell.n_cycles} cycles, eol={eol}")
    print(f"{len(cells)} cells validated")
    return 0


def cmd_fit_ecm(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    cell_filter = res.get("cell", None)
    truncate = res.get("truncate", None, int)
    out = _out_path(res.get("out", None), "ecm_params.csv")
    if manifest is None:
        raise ValidationError("--manifest is required")
    fp = res.fingerprint("fit-ecm")

    cells = ingest_manifest(manifest)
    if cell_filter is not None:
        cells = [c for c in cells if c.cell_id == cell_filter]
        if not cells:
            raise ValidationError(f"manifest has no cell {cell_filter!r}")
    rows = []
    for cell in cells:
        for record in cell.cycles:
            curve = record.relaxation
            if truncate is not None:
                curve = curve.truncated(truncate)
            report = ecm.fit(curve)
            p = report.params
            rows.append([
                cell.cell_id, record.cycle_index,
                _fmt(p.ocv), _fmt(p.r_o), _fmt(p.r_e), _fmt(p.c_e),
                _fmt(p.r_c), _fmt(p.c_c),
                _fmt(report.residual_rms_v), int(report.converged),
            ])
    _write_csv(out, header_comment(fp, kind="ecm-params"),
               ["cell_id", "cycle", "ocv_v", "r_o_ohm", "r_e_ohm", "c_e_farad",
                "r_c_ohm", "c_c_farad", "residual_rms_v", "converged"], rows)
    print(f"wrote {out} ({len(rows)} fits)")
    return 0


def cmd_features(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    feature_set = FeatureSet.parse(res.get("feature_set", "NOVEL_PRED"))
    window_start = res.get("window_start", 1, int)
    truncate = res.get("truncate", None, int)
    stride = res.get("stride", 1, int)
    out = _out_path(res.get("out", None), "features.csv")
    if manifest is None:
        raise ValidationError("--manifest is required")
    fp = res.fingerprint("features")

    if feature_set in (FeatureSet.NOVEL_CLASS, FeatureSet.RATE_CLASS):
        window = WindowSpec(mode=WindowMode.ADJACENT)
        first = 2
    else:
        window = WindowSpec(mode=WindowMode.FIXED_REFERENCE, reference_cycle=window_start)
        first = window_start + 1
    rows = []
    for cell in ingest_manifest(manifest):
        cache: dict = {}
        last = cell.cycles[-1].cycle_index
        for m in range(first, last + 1, stride):
            if not cell.has_cycle(m):
                continue
            fv = assemble(cell, m, window, feature_set, truncate=truncate, fit_cache=cache)
            for name, value in fv.values.items():
                rows.append([cell.cell_id, m, name, _fmt(value)])
    _write_csv(out, header_comment(fp, kind="features"),
               ["cell_id", "cycle", "feature", "value"], rows)
    print(f"wrote {out} ({len(rows)} values)")
    return 0


def _experiment_config(res: _Resolver) -> RulExperimentConfig:
    return RulExperimentConfig(
        feature_sets=_feature_sets(res.get("feature_sets", "NOVEL_PRED")),
        window_start=res.get("window_start", 1, int),
        truncate=res.get("truncate", None, int),
        stride=res.get("stride", 1, int),
        seed=res.get("seed", 0, int),
        restarts=res.get("restarts", 5, int),
        max_iters=res.get("max_iters", 500, int),
    )


def cmd_train_rul(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    out = _out_path(res.get("out", None), "rul_model.txt")
    config = _experiment_config(res)
    feature_set = config.feature_sets[0]
    if manifest is None:
        raise ValidationError("--manifest is required")
    fp = res.fingerprint("train-rul")

    cells = ingest_manifest(manifest)
    chemistries = {c.chemistry for c in cells}
    if len(chemistries) > 1:
        raise ValidationError(
            "train-rul expects a single-chemistry manifest; filter the manifest first"
        )
    caches: dict = {}
    samples = build_rul_samples(
        {c.cell_id: c for c in cells}, [c.cell_id for c in cells],
        feature_set, config.window(), config.truncate, config.stride, 0.8, caches,
    )
    if not samples:
        raise ValidationError("no labeled training samples (no cell reaches end of life?)")
    X = np.vstack([s.features.as_array() for s in samples])
    y = np.array([s.rul for s in samples])
    model = gpr_train(X, y, config.gpr_config(), feature_names=FEATURE_NAMES[feature_set])
    meta = {"feature_set": feature_set.value,
            "window_start": str(config.window_start),
            "truncate": "full" if config.truncate is None else str(config.truncate)}
    out.parent.mkdir(parents=True, exist_ok=True)
    modelio.save_model(model, out, header_comment=header_comment(fp, kind="model"), meta=meta)
    print(f"wrote {out} ({len(samples)} training samples)")
    return 0


def cmd_predict_rul(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    model_path = res.get("model", None)
    out = _out_path(res.get("out", None), "rul_predictions.csv")
    stride = res.get("stride", 1, int)
    if manifest is None or model_path is None:
        raise ValidationError("--manifest and --model are required")
    fp = res.fingerprint("predict-rul")

    model = modelio.load_model(model_path)
    meta = modelio.read_model_meta(model_path)
    feature_set = FeatureSet.parse(meta.get("feature_set", "NOVEL_PRED"))
    window_start = int(meta.get("window_start", "1"))
    truncate = None if meta.get("truncate", "full") == "full" else int(meta["truncate"])
    window = WindowSpec(mode=WindowMode.FIXED_REFERENCE, reference_cycle=window_start)

    rows = []
    for cell in ingest_manifest(manifest):
        cache: dict = {}
        last = cell.cycles[-1].cycle_index
        for m in range(window_start + 1, last + 1, stride):
            if not cell.has_cycle(m):
                continue
            fv = assemble(cell, m, window, feature_set, truncate=truncate, fit_cache=cache)
            mean, variance = gpr_predict(model, fv.as_array())
            rows.append([cell.cell_id, m, _fmt(cell.soh(m)),
                         _fmt(mean[0]), _fmt(variance[0])])
    _write_csv(out, header_comment(fp, kind="rul-predictions"),
               ["cell_id", "cycle", "soh", "rul_predicted_cycles", "predictive_variance"],
               rows)
    print(f"wrote {out} ({len(rows)} predictions)")
    return 0


def _policy_for(name: str | None, chemistry: Chemistry):
    if name is None:
        return NCM_POLICY if chemistry is Chemistry.NCM else NCA_POLICY
    key = name.strip().lower()
    if key == "nca":
        return NCA_POLICY
    if key == "ncm":
        return NCM_POLICY
    raise ValidationError(f"unknown threshold policy {name!r} (expected nca or ncm)")


def cmd_train_class(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    out = _out_path(res.get("out", None), "class_model.txt")
    chemistry = Chemistry.parse(res.get("chemistry", "NCA"))
    policy = _policy_for(res.get("policy", None), chemistry)
    feature_set = FeatureSet.parse(res.get("feature_set", "NOVEL_CLASS"))
    test_cycle = res.get("test_cycle", 100, int)
    window_cycles = res.get("window_cycles", 100, int)
    stride = res.get("stride", 1, int)
    seed = res.get("seed", 0, int)
    if manifest is None:
        raise ValidationError("--manifest is required")
    fp = res.fingerprint("train-class")

    from .experiments import build_classification_samples
    from .gpc import GpcTrainConfig

    cells = [c for c in ingest_manifest(manifest) if c.chemistry is chemistry]
    if not cells:
        raise ValidationError(f"manifest has no {chemistry.value} cells")
    pairs = build_classification_samples(
        {c.cell_id: c for c in cells}, [c.cell_id for c in cells],
        feature_set, test_cycle, window_cycles, policy, stride, 0.8, {},
    )
    if not pairs:
        raise ValidationError("no labeled samples inside the training window")
    X = np.vstack([s.features.as_array() for s, _ in pairs])
    labels = [label for _, label in pairs]
    dag = train_dag(X, labels, GpcTrainConfig(seed=seed),
                    feature_names=FEATURE_NAMES[feature_set])
    meta = {"feature_set": feature_set.value, "chemistry": chemistry.value,
            "policy_upper": repr(policy.upper_at_soh1),
            "policy_lower": repr(policy.lower_at_soh1)}
    out.parent.mkdir(parents=True, exist_ok=True)
    modelio.save_model(dag, out, header_comment=header_comment(fp, kind="model"), meta=meta)
    print(f"wrote {out} ({len(pairs)} training samples)")
    return 0


def cmd_classify(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    model_path = res.get("model", None)
    cycle = res.get("cycle", None, int)
    out = _out_path(res.get("out", None), "classification.csv")
    if manifest is None or model_path is None or cycle is None:
        raise ValidationError("--manifest, --model, and --cycle are required")
    fp = res.fingerprint("classify")

    dag = modelio.load_model(model_path)
    meta = modelio.read_model_meta(model_path)
    feature_set = FeatureSet.parse(meta.get("feature_set", "NOVEL_CLASS"))
    window = WindowSpec(mode=WindowMode.ADJACENT)
    rows = []
    for cell in ingest_manifest(manifest):
        if not (cell.has_cycle(cycle) and cell.has_cycle(cycle - 1)):
            continue
        fv = assemble(cell, cycle, window, feature_set, fit_cache={})
        label, probability = dag_classify(dag, fv.as_array())
        rows.append([cell.cell_id, cycle, _fmt(cell.soh(cycle)),
                     label.value, _fmt(probability)])
    _write_csv(out, header_comment(fp, kind="classification"),
               ["cell_id", "cycle", "soh", "label", "probability"], rows)
    print(f"wrote {out} ({len(rows)} cells)")
    return 0


def cmd_evaluate(args) -> int:
    res = _Resolver(args)
    manifest = res.get("manifest", None)
    experiment = res.get("experiment", "rul")
    outdir = Path(res.get("out", str(_out_path(None, "report"))))
    split_spec = res.get("split", "auto")
    seed = res.get("seed", 0, int)
    if manifest is None:
        raise ValidationError("--manifest is required")

    cells = ingest_manifest(manifest)
    split = split_dataset(cells, _parse_split(split_spec, cells), seed=seed)

    if experiment == "rul":
        config = _experiment_config(res)
        report = run_rul_experiment(cells, split, config)
    elif experiment == "truncation":
        config = _experiment_config(res)
        counts_text = res.get("sample_counts", "6,8,12,full")
        counts = [None if tok.strip() == "full" else int(tok)
                  for tok in counts_text.split(",")]
        report = run_truncation_sweep(cells, split, config, counts)
    elif experiment == "classification":
        chemistry = Chemistry.parse(res.get("chemistry", "NCA"))
        config = ClassificationConfig(
            feature_sets=_feature_sets(res.get("feature_sets", "NOVEL_CLASS")),
            chemistry=chemistry,
            test_cycle=res.get("test_cycle", 100, int),
            window_cycles=res.get("window_cycles", 100, int),
            policy=_policy_for(res.get("policy", None), chemistry),
            stride=res.get("stride", 1, int),
            seed=seed,
            restarts=res.get("restarts", 3, int),
            max_iters=res.get("max_iters", 200, int),
            allow_ncm_nca=res.flag("include_ncm_nca"),
        )
        report = run_classification_experiment(cells, split, config)
    else:
        raise ValidationError(
            f"unknown experiment {experiment!r} (rul, truncation, classification)"
        )

    report.config["split"] = split_spec
    report.config["split_seed"] = str(seed)
    report.write(outdir)
    if res.flag("plots"):
        from .plots import emit_plots
        emit_plots(report, outdir)
    for row in report.tables["metrics"]:
        print(row)
    print(f"wrote report under {outdir} (fingerprint {report.fingerprint})")
    return 0


def cmd_report(args) -> int:
    res = _Resolver(args)
    indir = res.get("in_dir", None)
    if indir is None:
        raise ValidationError("--in is required")
    report = read_report(indir)
    if not verify_report(report):
        raise ValidationError(
            f"{indir}: stored metrics do not match a recomputation from predictions"
        )
    print(f"report kind={report.kind} fingerprint={report.fingerprint}: metrics verified")
    for row in recompute_metrics(report):
        print(row)
    if res.flag("plots"):
        from .plots import emit_plots
        emit_plots(report, Path(indir))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batlife",
        description="Battery life prediction and classification from voltage relaxation",
    )
    parser.add_argument("--version", action="version", version=f"batlife {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="plain key=value config file; flags override it")

    p = sub.add_parser("simulate", help="generate a synthetic multi-condition fleet")
    common(p)
    p.add_argument("--cells", type=int, help="cells per condition (count, default 5)")
    p.add_argument("--conditions", type=int, help="number of cycling conditions (count, default 3)")
    p.add_argument("--seed", type=int, help="generator seed (integer, default 7)")
    p.add_argument("--noise-mv", dest="noise_mv", type=float,
                   help="relaxation voltage noise sigma (millivolts, default 0.2)")
    p.add_argument("--spread", type=float,
                   help="per-cell fractional parameter spread (dimensionless, default 0.02)")
    p.add_argument("--fade-refs", dest="fade_refs",
                   help="comma list of per-condition fade reference spans (cycles)")
    p.add_argument("--discharge-knots", dest="discharge_knots", type=int,
                   help="stored points per discharge curve (count, default 1000)")
    p.add_argument("--out", help="output dataset directory (path)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("ingest", help="validate a dataset manifest and its cells")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("fit-ecm", help="fit circuit parameters for every cycle")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--cell", help="restrict to one cell id")
    p.add_argument("--truncate", type=int,
                   help="relaxation samples kept per curve (count, >= 6; default full)")
    p.add_argument("--out", help="output CSV (path, default ecm_params.csv)")
    p.set_defaults(handler=cmd_fit_ecm)

    p = sub.add_parser("features", help="emit long-format feature CSV")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--feature-set", dest="feature_set",
                   help="ECM | STATS | BENCHMARK | NOVEL_PRED | NOVEL_CLASS | RATE_CLASS")
    p.add_argument("--window-start", dest="window_start", type=int,
                   help="reference cycle for voltage-difference features (cycle, default 1)")
    p.add_argument("--truncate", type=int,
                   help="relaxation samples kept per curve (count, >= 6; default full)")
    p.add_argument("--stride", type=int, help="cycle stride (cycles, default 1)")
    p.add_argument("--out", help="output CSV (path, default features.csv)")
    p.set_defaults(handler=cmd_features)

    def rul_flags(p):
        p.add_argument("--feature-sets", dest="feature_sets",
                       help="comma list of feature sets (default NOVEL_PRED)")
        p.add_argument("--window-start", dest="window_start", type=int,
                       help="reference cycle (cycle, default 1)")
        p.add_argument("--truncate", type=int,
                       help="relaxation samples kept (count, >= 6; default full)")
        p.add_argument("--stride", type=int, help="cycle stride (cycles, default 1)")
        p.add_argument("--seed", type=int, help="training seed (integer, default 0)")
        p.add_argument("--restarts", type=int, help="optimizer restarts (count, default 5)")
        p.add_argument("--max-iters", dest="max_iters", type=int,
                       help="optimizer iteration cap (count, default 500)")

    p = sub.add_parser("train-rul", help="train a remaining-life regressor")
    common(p)
    p.add_argument("--manifest", help="single-chemistry manifest file (path)")
    rul_flags(p)
    p.add_argument("--out", help="model file (path, default rul_model.txt)")
    p.set_defaults(handler=cmd_train_rul)

    p = sub.add_parser("predict-rul", help="predict remaining life with a trained model")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--model", help="trained model file (path)")
    p.add_argument("--stride", type=int, help="cycle stride (cycles, default 1)")
    p.add_argument("--out", help="output CSV (path, default rul_predictions.csv)")
    p.set_defaults(handler=cmd_predict_rul)

    p = sub.add_parser("train-class", help="train the three-way life classifier")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--chemistry", help="NCA | NCM (default NCA)")
    p.add_argument("--policy", help="threshold policy: nca (450/180) or ncm (800/200) cycles")
    p.add_argument("--feature-set", dest="feature_set",
                   help="feature set (default NOVEL_CLASS)")
    p.add_argument("--test-cycle", dest="test_cycle", type=int,
                   help="center of the aging-stage window (cycle, default 100)")
    p.add_argument("--window-cycles", dest="window_cycles", type=int,
                   help="aging-stage window width (cycles, default 100)")
    p.add_argument("--stride", type=int, help="cycle stride (cycles, default 1)")
    p.add_argument("--seed", type=int, help="training seed (integer, default 0)")
    p.add_argument("--out", help="model file (path, default class_model.txt)")
    p.set_defaults(handler=cmd_train_class)

    p = sub.add_parser("classify", help="classify cells at a cycle with a trained DAG")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--model", help="trained DAG model file (path)")
    p.add_argument("--cycle", type=int, help="cycle to classify at (cycle)")
    p.add_argument("--out", help="output CSV (path, default classification.csv)")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("evaluate", help="run a full experiment and write a report")
    common(p)
    p.add_argument("--manifest", help="manifest file (path)")
    p.add_argument("--experiment", help="rul | truncation | classification (default rul)")
    p.add_argument("--split",
                   help="per-condition train/test cells: 'auto', 'T/E', or 'COND=T/E,...'")
    rul_flags(p)
    p.add_argument("--sample-counts", dest="sample_counts",
                   help="truncation sweep counts, e.g. '6,8,12,full' (samples)")
    p.add_argument("--chemistry", help="classification chemistry: NCA | NCM")
    p.add_argument("--policy", help="classification threshold policy: nca | ncm")
    p.add_argument("--test-cycle", dest="test_cycle", type=int,
                   help="classification window center (cycle, default 100)")
    p.add_argument("--window-cycles", dest="window_cycles", type=int,
                   help="classification window width (cycles, default 100)")
    p.add_argument("--include-ncm-nca", dest="include_ncm_nca", action="store_true",
                   help="allow NCM+NCA cells in classification (excluded by default)")
    p.add_argument("--plots", action="store_true", help="also emit SVG plots")
    p.add_argument("--out", help="report directory (path, default report/)")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("report", help="verify and summarize a written report")
    common(p)
    p.add_argument("--in", dest="in_dir", help="report directory (path)")
    p.add_argument("--plots", action="store_true", help="also emit SVG plots")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except NumericalError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
