"""Report rendering in markdown, CSV and structured (JSON) form.

Every renderer works from the same :class:`Table` objects, so CSV and JSON
carry identical full-precision numbers; only markdown rounds (to three
significant figures).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .calibration import Calibration, summary_rows
from .comparison import ComparisonResult
from .errors import ReportError
from .pipeline import ELIMINATED, FLAGGED, PipelineState, SelectionResult
from .quality import StyleSummary

FORMATS = ("markdown", "csv", "structured")


def sig3(x: Optional[float]) -> str:
    """Three significant figures, trailing zeros kept: 0.5 -> '0.500', 16.17 -> '16.2'."""
    if x is None:
        return "---"
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if abs(x) >= 1000:
        return str(int(round(x)))
    text = f"{x:#.3g}"
    if "e" in text:
        # rounding carried into the thousands, or a tiny magnitude
        text = str(int(round(x))) if abs(x) >= 1 else f"{x:.2e}"
    text = text.rstrip(".")
    return "0.00" if text in ("-0.00", "0.00", "-0") else text


def p_value(p: Optional[float]) -> str:
    """Probability as two decimals without the leading zero: 0.923 -> '.92'."""
    if p is None:
        return "---"
    text = f"{p:.2f}"
    return text[1:] if text.startswith("0") else text


def interval(lo: Optional[float], hi: Optional[float]) -> str:
    if lo is None or hi is None:
        return "---"
    return f"[{sig3(lo)}, {sig3(hi)}]"


@dataclass
class Column:
    key: str
    header: str
    fmt: Optional[Callable] = None  # formats the cell value
    cell: Optional[Callable] = None  # builds the cell from the whole row

    def render(self, row: dict) -> str:
        if self.cell is not None:
            return self.cell(row)
        v = row.get(self.key)
        if v is None:
            return "---"
        return self.fmt(v) if self.fmt else str(v)


@dataclass
class Table:
    name: str
    title: str
    columns: list
    rows: list = field(default_factory=list)

    def markdown(self) -> str:
        head = "| " + " | ".join(c.header for c in self.columns) + " |"
        rule = "|" + "|".join("---" for _ in self.columns) + "|"
        body = ["| " + " | ".join(c.render(r) for c in self.columns) + " |" for r in self.rows]
        return "\n".join([f"### {self.title}", "", head, rule, *body])

    def keys(self) -> list:
        seen = []
        for r in self.rows:
            for k in r:
                if k not in seen:
                    seen.append(k)
        return seen


# --- table builders ------------------------------------------------------------


def calibration_table(calibrations: Sequence[Calibration], level: float = 0.90) -> Table:
    pct = f"{round(100 * level):d}%"
    rows = []
    for r in summary_rows(calibrations, level):
        rows.append({
            "test_set": r.test_set,
            "metric": r.metric,
            "tp": r.matrix.tp, "fp": r.matrix.fp, "fn": r.matrix.fn, "tn": r.matrix.tn,
            "tpr_mean": r.tpr.mean, "tpr_ci_low": r.tpr.ci_low, "tpr_ci_high": r.tpr.ci_high,
            "fpr_mean": r.fpr.mean, "fpr_ci_low": r.fpr.ci_low, "fpr_ci_high": r.fpr.ci_high,
            "level": level,
        })
    return Table(
        "calibration",
        "Metric calibration against human labels",
        [
            Column("test_set", "Test set"),
            Column("metric", "Metric"),
            Column("tpr_mean", "TPR Mean", sig3),
            Column("tpr_ci", f"TPR {pct} CI", cell=lambda r: interval(r["tpr_ci_low"], r["tpr_ci_high"])),
            Column("fpr_mean", "FPR Mean", sig3),
            Column("fpr_ci", f"FPR {pct} CI", cell=lambda r: interval(r["fpr_ci_low"], r["fpr_ci_high"])),
        ],
        rows,
    )


def comparison_table(
    comparisons: Sequence[ComparisonResult],
    idk_pct: Optional[Mapping[tuple, float]] = None,
) -> Table:
    """Per test set: baseline row first, then candidates in input order."""
    idk_pct = idk_pct or {}
    rows = []
    by_set: dict[str, list] = {}
    for c in comparisons:
        by_set.setdefault(c.test_set, []).append(c)
    for ts in sorted(by_set):
        group = by_set[ts]
        baselines = []
        for c in group:
            if c.baseline not in baselines:
                baselines.append(c.baseline)
        for b in baselines:
            rows.append({"test_set": ts, "model": b, "role": "baseline", "metric": group[0].metric,
                         "idk_pct": idk_pct.get((b, ts))})
        for c in group:
            rows.append({
                "test_set": ts, "model": c.candidate, "role": "candidate", "metric": c.metric,
                "idk_pct": idk_pct.get((c.candidate, ts)),
                "delta_mean_pp": c.delta_mean, "ci_low_pp": c.ci_low, "ci_high_pp": c.ci_high,
                "p_improvement": c.p_improvement, "n_examples": c.n_examples, "level": c.level,
            })
    level = comparisons[0].level if comparisons else 0.90
    cols = [
        Column("test_set", "Test set"),
        Column("model", "Model"),
        Column("idk_pct", "IDK", sig3),
        Column("delta_mean_pp", "Diff", sig3),
        Column("ci", f"{round(100 * level):d}% CI", cell=lambda r: interval(r.get("ci_low_pp"), r.get("ci_high_pp"))),
    ]
    if any(c.p_improvement is not None for c in comparisons):
        cols.append(Column("p_improvement", "p", p_value))
    return Table("comparisons", "Correctness difference against the baseline (percentage points)", cols, rows)


def style_table(summaries: Sequence[StyleSummary]) -> Table:
    rows = []
    for s in summaries:
        rows.append({
            "test_set": s.test_set, "model": s.model, "n": s.n,
            "median_response_time": s.median_response_time, "median_words": s.median_words,
            "pct_bad_style": s.pct_bad_style, "pct_poor_formatting": s.pct_poor_formatting,
            "pct_according_to": s.pct_according_to, "pct_mention_knowledge": s.pct_mention_knowledge,
            "pct_mention_sources": s.pct_mention_sources, "pct_idk": s.pct_idk,
            "conformance_rate": s.conformance_rate,
        })
    one = lambda v: f"{v:.1f}"  # noqa: E731
    return Table(
        "style",
        "Style and latency (medians)",
        [
            Column("test_set", "Test set"),
            Column("model", "Model"),
            Column("median_response_time", "Response Time (s)", lambda v: f"{v:.3f}"),
            Column("median_words", "Median words"),
            Column("pct_bad_style", "% Bad Style", one),
            Column("pct_poor_formatting", "% Poor Formatting", one),
            Column("pct_according_to", "% According To", one),
            Column("pct_mention_knowledge", "% Mention Knowledge", one),
            Column("pct_mention_sources", "% Mention Sources", one),
        ],
        rows,
    )


def _evidence_text(r: dict) -> str:
    parts = []
    for e in r["evidence"]:
        where = f"[{e['test_set']}]" if e.get("test_set") else ""
        parts.append(f"{e['quantity']}{where}={sig3(e['value'])} vs {sig3(e['threshold'])}")
    return "; ".join(parts)


def gate_table(state: PipelineState) -> Table:
    rows = []
    for rep in state.reports:
        j = rep.to_json()
        rows.append({"step": rep.step, "model": rep.model, "outcome": rep.outcome,
                     "clauses": ",".join(rep.clauses), "evidence": j["evidence"]})
    return Table(
        "gates",
        f"Gate decisions (baseline: {state.baseline})",
        [
            Column("step", "Step"),
            Column("model", "Model"),
            Column("outcome", "Outcome"),
            Column("clauses", "Clause", lambda v: v or "---"),
            Column("evidence", "Evidence", cell=_evidence_text),
        ],
        rows,
    )


def selection_table(selection: SelectionResult) -> Table:
    rows = [{"region": r or "any", "modality": m, "model": model}
            for (r, m), model in sorted(selection.assignment.items(), key=lambda kv: (kv[0][0] is not None, kv[0][0] or "", kv[0][1]))]
    return Table(
        "selection",
        "Coverage assignment",
        [Column("region", "Region"), Column("modality", "Modality"), Column("model", "Model")],
        rows,
    )


# --- documents ------------------------------------------------------------------


@dataclass
class ReportBundle:
    calibrations: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)
    styles: list = field(default_factory=list)
    state: Optional[PipelineState] = None
    selection: Optional[SelectionResult] = None
    idk_pct: dict = field(default_factory=dict)
    level: float = 0.90

    def is_empty(self) -> bool:
        return not (self.calibrations or self.comparisons or self.styles or self.state or self.selection)

    def tables(self) -> list[Table]:
        out = []
        if self.calibrations:
            out.append(calibration_table(self.calibrations, self.level))
        if self.comparisons:
            idk = dict(self.idk_pct)
            for s in self.styles:
                idk.setdefault((s.model, s.test_set), s.pct_idk)
            out.append(comparison_table(self.comparisons, idk))
        if self.styles:
            out.append(style_table(self.styles))
        if self.state is not None:
            out.append(gate_table(self.state))
        if self.selection is not None:
            out.append(selection_table(self.selection))
        return out


def narrative(state: Optional[PipelineState], selection: Optional[SelectionResult]) -> list[str]:
    lines = []
    if state is not None:
        names = {1: "vetting", 2: "output conformance", 4: "correctness, IDK and latency", 5: "style"}
        for step in sorted({r.step for r in state.reports}):
            gone = [r for r in state.reports if r.step == step and r.outcome == ELIMINATED]
            flagged = [r.model for r in state.reports if r.step == step and r.outcome == FLAGGED]
            label = names.get(step, f"step {step}")
            if gone:
                detail = ", ".join(f"{r.model} ({'/'.join(r.clauses)})" for r in gone)
                lines.append(f"- Step {step} ({label}) eliminated: {detail}.")
            else:
                lines.append(f"- Step {step} ({label}) eliminated nobody.")
            if flagged:
                lines.append(f"  Flagged for another prompt iteration: {', '.join(flagged)}.")
        lines.append(f"- Surviving candidates: {', '.join(state.live) if state.live else 'none'}.")
    if selection is not None:
        lines.append(f"- Step 6 (selection) chose: {', '.join(sorted(selection.chosen))}.")
        lines.append(f"  {selection.rationale}.")
    return lines


def render_markdown(bundle: ReportBundle) -> str:
    parts = ["# Migration report", ""]
    story = narrative(bundle.state, bundle.selection)
    if story:
        parts += ["## Decision summary", "", *story, ""]
    for t in bundle.tables():
        parts += [t.markdown(), ""]
    return "\n".join(parts)


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def render_csv(bundle: ReportBundle) -> str:
    """One block per table, blank line between blocks; first column names the table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    for i, t in enumerate(bundle.tables()):
        if i:
            w.writerow([])
        keys = t.keys()
        w.writerow(["table", *keys])
        for r in t.rows:
            w.writerow([t.name, *(_csv_value(r.get(k)) for k in keys)])
    return buf.getvalue()


def render_structured(bundle: ReportBundle) -> str:
    doc = {"tables": {t.name: t.rows for t in bundle.tables()}}
    if bundle.state is not None:
        doc["survivors"] = list(bundle.state.live)
        doc["baseline"] = bundle.state.baseline
    if bundle.selection is not None:
        doc["selection"] = bundle.selection.to_json()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_report(bundle: ReportBundle, fmt: str = "markdown") -> str:
    if bundle.is_empty():
        raise ReportError("nothing to report: no results supplied")
    if fmt == "markdown":
        return render_markdown(bundle)
    if fmt == "csv":
        return render_csv(bundle)
    if fmt == "structured":
        return render_structured(bundle)
    raise ReportError(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def read_csv_tables(text: str) -> dict[str, list[dict]]:
    """Parse :func:`render_csv` output back into ``{table: [row, ...]}`` of strings."""
    tables: dict[str, list[dict]] = {}
    header = None
    for row in csv.reader(io.StringIO(text)):
        if not row:
            header = None
            continue
        if header is None:
            header = row
            continue
        tables.setdefault(row[0], []).append(dict(zip(header[1:], row[1:])))
    return tables
