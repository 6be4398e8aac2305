"""Optional SVG plots rendered from report tables.

Requires matplotlib (install the ``plots`` extra); everything here is
presentation only, so the import is deferred until a plot is requested.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ValidationError
from .experiments import ALL, ExperimentReport


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg", force=True)
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ValidationError(
            "plot emission requires matplotlib; install batlife[plots]"
        ) from exc
    return plt


def _groups(rows, key):
    order = []
    for row in rows:
        if row[key] not in order:
            order.append(row[key])
    return order


def plot_rul_scatter(report: ExperimentReport, path) -> None:
    plt = _pyplot()
    rows = report.tables.get("predictions", [])
    fig, ax = plt.subplots(figsize=(5, 5))
    for condition in _groups(rows, "condition"):
        sub = [r for r in rows if r["condition"] == condition]
        ax.scatter([r["rul_observed"] for r in sub],
                   [r["rul_predicted"] for r in sub],
                   s=8, alpha=0.6, label=condition)
    lims = ax.get_xlim()
    ax.plot(lims, lims, "k--", linewidth=0.8)
    ax.set_xlabel("observed remaining life (cycles)")
    ax.set_ylabel("predicted remaining life (cycles)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_importance(report: ExperimentReport, path) -> None:
    plt = _pyplot()
    rows = report.tables.get("importance", [])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    features = _groups(rows, "feature")
    for i, chemistry in enumerate(_groups(rows, "chemistry")):
        sub = {r["feature"]: r["weight_by_length_scale"]
               for r in rows if r["chemistry"] == chemistry}
        xs = [features.index(f) + 0.2 * i for f in sub]
        ax.bar(xs, list(sub.values()), width=0.2, label=chemistry)
    ax.set_xticks(range(len(features)))
    ax.set_xticklabels(features, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("relative importance")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_truncation(report: ExperimentReport, path) -> None:
    plt = _pyplot()
    rows = report.tables.get("sweep", [])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for feature_set in _groups(rows, "feature_set"):
        sub = [r for r in rows if r["feature_set"] == feature_set]
        sub.sort(key=lambda r: r["relaxation_time_s"])
        ax.plot([r["relaxation_time_s"] / 60.0 for r in sub],
                [r["rmse_cycles"] for r in sub], marker="o", label=feature_set)
    ax.set_xlabel("relaxation time (min)")
    ax.set_ylabel("RMSE (cycles)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_probability_scatter(report: ExperimentReport, path) -> None:
    plt = _pyplot()
    rows = report.tables.get("predictions", [])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for correct, marker, label in ((1, "o", "correct"), (0, "x", "misclassified")):
        sub = [r for r in rows if r["correct"] == correct]
        ax.scatter([r["soh"] for r in sub], [r["probability"] for r in sub],
                   s=12, marker=marker, alpha=0.7, label=label)
    ax.axhline(0.5, color="k", linewidth=0.8, linestyle="--")
    ax.set_xlabel("state of health")
    ax.set_ylabel("membership probability of assigned class")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_accuracy(report: ExperimentReport, path) -> None:
    plt = _pyplot()
    rows = [r for r in report.tables.get("metrics", []) if r["condition"] != ALL]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    conditions = _groups(rows, "condition")
    for i, feature_set in enumerate(_groups(rows, "feature_set")):
        sub = {r["condition"]: r["accuracy_pct"]
               for r in rows if r["feature_set"] == feature_set}
        xs = [conditions.index(c) + 0.2 * i for c in sub]
        ax.bar(xs, list(sub.values()), width=0.2, label=feature_set)
    ax.set_xticks(range(len(conditions)))
    ax.set_xticklabels(conditions, fontsize=7)
    ax.set_ylabel("accuracy (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_plots(report: ExperimentReport, outdir) -> list[Path]:
    """Write the SVG set appropriate to the report kind; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(fn, name):
        path = outdir / name
        fn(report, path)
        written.append(path)

    if report.kind in ("rul", "truncation"):
        emit(plot_rul_scatter, "rul_scatter.svg")
        if report.tables.get("importance"):
            emit(plot_importance, "importance.svg")
        if report.kind == "truncation":
            emit(plot_truncation, "truncation.svg")
    elif report.kind == "classification":
        emit(plot_probability_scatter, "probability_scatter.svg")
        emit(plot_accuracy, "accuracy.svg")
    return written
