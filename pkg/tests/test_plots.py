import pytest

matplotlib = pytest.importorskip("matplotlib")

from batlife.experiments import ExperimentReport
from batlife.plots import emit_plots


def _rul_report():
    predictions = [
        {"feature_set": "NOVEL_PRED", "chemistry": "NCA", "condition": "CY25-0.5/1",
         "cell_id": "a", "cycle": 10 * i, "soh": 1.0 - 0.01 * i, "eol_cycles": 200,
         "rul_observed": 200.0 - 10 * i, "rul_predicted": 198.0 - 10 * i,
         "rul_predicted_var": 25.0}
        for i in range(1, 8)
    ]
    importance = [
        {"feature_set": "NOVEL_PRED", "chemistry": "NCA", "feature": name,
         "length_scale": 1.0 + i, "weight_by_length_scale": 0.25,
         "weight_by_inverse_length_scale": 0.25}
        for i, name in enumerate(("ocv", "r_o", "dv_sum", "dv_last"))
    ]
    return ExperimentReport(kind="rul", fingerprint="deadbeef0000",
                            config={"seed": "0"},
                            tables={"predictions": predictions, "importance": importance})


def _classification_report():
    predictions = [
        {"feature_set": "NOVEL_CLASS", "condition": "CY25-0.5/1", "cell_id": "a",
         "cycle": 30 + i, "soh": 0.95 - 0.01 * i, "rul_observed": 100.0 - i,
         "label_observed": "Medium", "label_predicted": "Medium" if i % 3 else "Short",
         "probability": 0.6 + 0.03 * i, "correct": int(bool(i % 3))}
        for i in range(9)
    ]
    metrics = [
        {"feature_set": "NOVEL_CLASS", "condition": "CY25-0.5/1", "n_samples": 9,
         "accuracy_pct": 66.7},
        {"feature_set": "NOVEL_CLASS", "condition": "ALL", "n_samples": 9,
         "accuracy_pct": 66.7},
    ]
    return ExperimentReport(kind="classification", fingerprint="deadbeef0001",
                            config={"seed": "0"},
                            tables={"predictions": predictions, "metrics": metrics})


def test_rul_plot_set(tmp_path):
    written = emit_plots(_rul_report(), tmp_path)
    names = {p.name for p in written}
    assert names == {"rul_scatter.svg", "importance.svg"}
    for path in written:
        assert path.stat().st_size > 500
        assert b"<svg" in path.read_bytes()[:300]


def test_classification_plot_set(tmp_path):
    written = emit_plots(_classification_report(), tmp_path)
    names = {p.name for p in written}
    assert names == {"probability_scatter.svg", "accuracy.svg"}
    for path in written:
        assert b"<svg" in path.read_bytes()[:300]
