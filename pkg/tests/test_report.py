import json

import pytest

from migration_gate.calibration import ConfusionMatrix, calibrate
from migration_gate.comparison import ComparisonResult
from migration_gate.errors import ReportError
from migration_gate.pipeline import (
    GatePolicy,
    ModelProfile,
    PriceTier,
    QualityObservation,
    SelectionRequirements,
    run_gates,
    select_models,
)
from migration_gate.quality import StyleSummary
from migration_gate.report import (
    ReportBundle,
    comparison_table,
    p_value,
    read_csv_tables,
    render_report,
    sig3,
)


@pytest.mark.parametrize("x,text", [
    (0.5, "0.500"), (16.17, "16.2"), (-3.456, "-3.46"), (0.005678, "0.00568"), (123.4, "123"),
    (999.6, "1000"), (2500.2, "2500"), (0.0, "0.00"), (None, "---"), (float("inf"), "inf"),
])
def test_sig3(x, text):
    assert sig3(x) == text


@pytest.mark.parametrize("p,text", [(0.923, ".92"), (0.004, ".00"), (1.0, "1.00"), (None, "---")])
def test_p_value(p, text):
    assert p_value(p) == text


def cmp(cand, ts, d, p=0.9):
    return ComparisonResult("Base", cand, "k", ts, d, d - 2.5, d + 2.5, p, 94, 10_000, 1)


def test_comparison_table_baseline_first_and_p_column():
    t = comparison_table([cmp("X", "basic", 1.234), cmp("Y", "basic", -0.5)], {("Base", "basic"): 4.26})
    md = t.markdown()
    lines = md.splitlines()
    assert lines[2].endswith("| p |")
    assert lines[4].startswith("| basic | Base | 4.26 | --- | --- | --- |")
    assert "| basic | X | --- | 1.23 | [-1.27, 3.73] | .90 |" in md


def test_p_column_omitted_without_probabilities():
    t = comparison_table([cmp("X", "basic", 1.0, p=None)])
    assert "| p |" not in t.markdown()


def bundle():
    cal = [calibrate(ConfusionMatrix(52, 0, 6, 8), "new_correctness", "hotpot")]
    comps = [cmp("X", "hotpot", 3.0), cmp("Y", "hotpot", -4.0)]
    styles = [StyleSummary("X", "hotpot", 100, 2, 1, 0, 0, 1, 40, 1.25, n_idk=3)]
    profiles = [ModelProfile(m, frozenset({"R"}), frozenset({"text"}), PriceTier.Low) for m in ("Base", "X", "Y")]
    obs = [QualityObservation(m, "hotpot", 3.0, 1.0, 2.0 if m == "X" else 0.0) for m in ("Base", "X", "Y")]
    state = run_gates(profiles, comps, obs, policy=GatePolicy())
    sel = select_models([p for p in profiles if p.name in state.live], SelectionRequirements.cross(["R"], ["text"]))
    return ReportBundle(cal, comps, styles, state, sel)


def test_markdown_contains_all_sections():
    md = render_report(bundle(), "markdown")
    for title in ("Decision summary", "Metric calibration", "Correctness difference", "Style and latency",
                  "Gate decisions", "Coverage assignment"):
        assert title in md
    assert "Y (correctness)" in md
    assert "| 0.883 | [0.809, 0.943] | 0.100 | [0.00568, 0.283] |" in md


def test_csv_matches_structured_at_full_precision():
    b = bundle()
    csv_tables = read_csv_tables(render_report(b, "csv"))
    doc = json.loads(render_report(b, "structured"))
    assert set(csv_tables) == set(doc["tables"])
    for name, rows in doc["tables"].items():
        assert len(csv_tables[name]) == len(rows)
        for csv_row, row in zip(csv_tables[name], rows):
            for k, v in row.items():
                if isinstance(v, float):
                    assert float(csv_row[k]) == v
                elif v is None:
                    assert csv_row[k] == ""
                elif isinstance(v, (list, dict)):
                    assert json.loads(csv_row[k]) == v
                else:
                    assert csv_row[k] == str(v)


def test_render_is_deterministic():
    assert render_report(bundle(), "csv") == render_report(bundle(), "csv")


def test_errors():
    with pytest.raises(ReportError):
        render_report(ReportBundle(), "markdown")
    with pytest.raises(ReportError):
        render_report(bundle(), "pdf")
