"""Command-line entry point: one subcommand per framework stage.

Exit status is 0 on success, 1 for invalid input, failed validation or an
infeasible selection, and 2 for I/O or transport failures. Diagnostics go to
standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import calibration as cal
from . import comparison as cmp
from . import dataset as ds
from . import judge as jg
from . import pipeline as pl
from . import quality as qc
from . import report as rp
from .errors import InputError, IOFailure, MigrationGateError, ValidationError

log = logging.getLogger("migration_gate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are input errors, not I/O failures
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _jsonl(objs) -> str:
    return "".join(json.dumps(o, sort_keys=True, ensure_ascii=False) + "\n" for o in objs)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc.msg})") from None


def _read_jsonl(path: str) -> list[dict]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ds.RecordParseError(path, lineno, f"malformed JSON ({exc.msg})") from None
    return out


def load_comparisons(path: str) -> list[cmp.ComparisonResult]:
    try:
        return [cmp.ComparisonResult.from_json(o) for o in _read_jsonl(path)]
    except KeyError as exc:
        raise ValidationError(f"{path}: comparison record lacks {exc.args[0]!r}") from None


def load_observations(path: str) -> list[pl.QualityObservation]:
    try:
        return [pl.QualityObservation.from_json(o) for o in _read_jsonl(path)]
    except KeyError as exc:
        raise ValidationError(f"{path}: style record lacks {exc.args[0]!r}") from None


# --- subcommands -------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    cals = []
    if args.matrices:
        doc = _read_json(args.matrices)
        for e in doc["matrices"] if isinstance(doc, dict) else doc:
            try:
                cm = cal.ConfusionMatrix(**{k: e[k] for k in ("tp", "fp", "fn", "tn")})
            except KeyError as exc:
                raise ValidationError(f"{args.matrices}: matrix entry lacks {exc.args[0]!r}") from None
            if args.metric and e["metric"] not in args.metric:
                continue
            if args.test_set and e["test_set"] not in args.test_set:
                continue
            cals.append(cal.calibrate(cm, e["metric"], e["test_set"]))
    else:
        if not (args.labels and args.verdicts and args.examples):
            raise ValidationError("calibrate needs --matrices, or all of --labels, --verdicts and --examples")
        corpus = ds.Corpus.load(examples=args.examples, verdicts=args.verdicts, labels=args.labels)
        metrics = args.metric or sorted({v.metric for v in corpus.verdicts})
        test_sets = args.test_set or sorted({ex.test_set for ex in corpus.examples.values()})
        for m in metrics:
            for ts in test_sets:
                pairs = ds.join_calibration(corpus.labels, corpus.verdicts, m, ts, corpus.examples)
                cals.append(cal.calibrate(cal.confusion_matrix(pairs), m, ts))
    if not cals:
        raise ValidationError("no calibrations selected")
    if args.out:
        cal.save_calibration(cals, args.out, level=args.level)
    bundle = rp.ReportBundle(calibrations=sorted(cals, key=lambda c: (c.test_set, c.metric)), level=args.level)
    _write(args.summary, rp.render_report(bundle, args.format))
    return 0


def cmd_judge(args) -> int:
    examples = ds.load_records(args.examples, "examples")
    runs = ds.load_records(args.runs, "runs")
    if args.prompt_id:
        runs = tuple(r for r in runs if r.prompt_id == args.prompt_id)
    if args.models:
        runs = tuple(r for r in runs if r.model in args.models)
    config = jg.JudgeConfig(
        endpoint_url=args.endpoint,
        model_name=args.judge_model,
        max_parallel_requests=args.max_parallel,
        timeout=args.timeout,
        max_retries=args.max_retries,
        backoff_base=args.backoff_base,
        temperature=args.temperature,
        token_env=args.token_env,
        max_parse_failure_rate=args.max_parse_failure_rate,
    )
    try:
        result = jg.judge_run(examples, runs, args.template, config, metric=args.metric)
    except jg.JudgeAbortError as exc:
        if args.failures:
            _write(args.failures, _jsonl(o.to_json() for o in exc.outcomes if not o.parse_ok))
        raise
    ds.dump_records(result.verdicts, args.out)
    if args.failures:
        _write(args.failures, _jsonl(o.to_json() for o in result.failures))
    print(f"{len(result.verdicts)} verdicts written, {len(result.failures)} parse failures", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    calibrations = cal.load_calibration(args.calibration)
    examples = ds.load_records(args.examples, "examples")
    verdicts = ds.load_records(args.verdicts, "verdicts")
    runs = ds.load_records(args.runs, "runs") if args.runs else None
    metric = args.metric
    test_sets = args.test_set or sorted({c.test_set for c in calibrations if c.metric == metric})
    if not test_sets:
        raise ValidationError(f"the calibration file has no entry for metric {metric!r}")
    results = []
    for ts in test_sets:
        try:
            calib = cal.find_calibration(calibrations, metric, ts)
        except KeyError:
            raise ValidationError(f"no calibration for {metric!r} on test set {ts!r}") from None
        for cand in args.candidate:
            paired = ds.align_paired_runs(
                verdicts, args.baseline, cand, metric, ts, examples, runs=runs, exclude_idk=args.exclude_idk
            )
            results.append(
                cmp.compare_with(
                    paired, calib, n_samples=args.samples, seed=args.seed, level=args.level,
                    workers=args.workers, variance=args.variance,
                )
            )
    _write(args.out, _jsonl(r.to_json() for r in results))
    return 0


def cmd_style(args) -> int:
    examples = ds.index_examples(ds.load_records(args.examples, "examples"))
    runs = ds.load_records(args.runs, "runs")
    rules = qc.load_rules(args.rules) if args.rules else qc.DEFAULT_RULES
    models = args.models or sorted({r.model for r in runs})
    test_sets = args.test_set or sorted({ex.test_set for ex in examples.values()})
    out = []
    for m in models:
        for ts in test_sets:
            out.append(qc.summarize_style(runs, m, ts, examples, rules, prompt_id=args.prompt_id))
    _write(args.out, _jsonl(s.to_json() for s in out))
    return 0


def _gate_state(args) -> tuple[pl.PipelineState, pl.GatePolicy]:
    policy = pl.load_policy(args.policy)
    profiles = pl.load_profiles(args.profiles)
    comparisons = load_comparisons(args.comparisons)
    observations = load_observations(args.styles)
    conformance = None
    if args.conformance:
        conformance = {k: float(v) for k, v in _read_json(args.conformance).items()}
    state = pl.run_gates(profiles, comparisons, observations, args.baseline, policy, conformance)
    return state, policy


def cmd_gate(args) -> int:
    state, policy = _gate_state(args)
    doc = state.to_json()
    doc["policy"] = policy.to_json()
    _write(args.out, _dump_json(doc))
    return 0


def _load_ranks(path: str) -> dict[str, int]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and "delta_mean_pp" not in doc:
        return {k: int(v) for k, v in doc.items()}
    return cmp.correctness_ranks(load_comparisons(path))


def cmd_select(args) -> int:
    profiles = pl.load_profiles(args.profiles)
    requirements = pl.load_requirements(args.requirements)
    if args.gate:
        survivors = set(_read_json(args.gate)["survivors"])
        profiles = [p for p in profiles if p.name in survivors]
    elif args.exclude:
        profiles = [p for p in profiles if p.name not in args.exclude]
    if not profiles:
        raise pl.EmptyCandidatePoolError("no candidate profiles to select from")
    ranks = _load_ranks(args.ranks) if args.ranks else None
    if ranks is not None:
        # rank only the pool so that eliminated models do not shift positions
        pool = {p.name for p in profiles}
        order = sorted((r, m) for m, r in ranks.items() if m in pool)
        ranks = {m: i + 1 for i, (_, m) in enumerate(order)}
    result = pl.select_models(profiles, requirements, ranks)
    _write(args.out, _dump_json(result.to_json()))
    return 0


def _classify(path: str) -> tuple[str, object]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict):
        if doc.get("format") == cal.FORMAT_NAME:
            return "calibration", cal.loads_calibration(text, source=path)
        if "reports" in doc:
            return "gate", pl.PipelineState.from_json(doc)
        if "chosen" in doc:
            return "selection", pl.SelectionResult.from_json(doc)
    records = _read_jsonl(path)
    if not records:
        raise ValidationError(f"{path}: empty input")
    first = records[0]
    if "delta_mean_pp" in first:
        return "comparisons", [cmp.ComparisonResult.from_json(o) for o in records]
    if "n_bad_style" in first:
        return "styles", [qc.StyleSummary.from_json(o) for o in records]
    if "pct_bad_style" in first or "pct_idk" in first:
        return "observations", [pl.QualityObservation.from_json(o) for o in records]
    raise ValidationError(f"{path}: unrecognised report input")


def cmd_report(args) -> int:
    bundle = rp.ReportBundle(level=args.level)
    for path in args.inputs:
        kind, payload = _classify(path)
        if kind == "calibration":
            bundle.calibrations.extend(payload)
        elif kind == "comparisons":
            bundle.comparisons.extend(payload)
        elif kind == "styles":
            bundle.styles.extend(payload)
        elif kind == "observations":
            bundle.idk_pct.update({(o.model, o.test_set): o.pct_idk for o in payload if o.pct_idk is not None})
        elif kind == "gate":
            bundle.state = payload
        else:
            bundle.selection = payload
    bundle.calibrations.sort(key=lambda c: (c.test_set, c.metric))
    _write(args.out, rp.render_report(bundle, args.format))
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="migration-gate", description="Calibrated, gated LLM migration decisions.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="fit TPR/FPR posteriors from human labels")
    p.add_argument("--labels")
    p.add_argument("--verdicts")
    p.add_argument("--examples", help="examples file; gives each record its test set")
    p.add_argument("--matrices", help="JSON list of precomputed confusion matrices instead of records")
    p.add_argument("--metric", action="append", help="restrict to this metric (repeatable)")
    p.add_argument("--test-set", action="append", help="restrict to this test set (repeatable)")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--out", help="calibration artifact to write")
    p.add_argument("--summary", help="where to write the summary table (default stdout)")
    p.add_argument("--format", choices=rp.FORMATS, default="markdown")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("judge", help="produce verdicts by calling a judge endpoint")
    p.add_argument("--examples", required=True)
    p.add_argument("--runs", required=True)
    p.add_argument("--template", required=True, choices=jg.TEMPLATE_IDS)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--judge-model", default="judge")
    p.add_argument("--metric", help="metric name written to the verdicts (default: template id)")
    p.add_argument("--prompt-id")
    p.add_argument("--models", nargs="+")
    p.add_argument("--failures", help="write parse-failure outcomes here")
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--backoff-base", type=float, default=1.0)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--token-env", default=jg.DEFAULT_TOKEN_ENV)
    p.add_argument("--max-parse-failure-rate", type=float, default=0.10)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("compare", help="posterior correctness difference against a baseline")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True, nargs="+")
    p.add_argument("--metric", default="new_correctness")
    p.add_argument("--test-set", action="append")
    p.add_argument("--runs", help="run records; needed with --exclude-idk")
    p.add_argument("--exclude-idk", action="store_true")
    p.add_argument("--samples", type=int, default=cmp.DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=cmp.DEFAULT_SEED)
    p.add_argument("--level", type=float, default=cmp.DEFAULT_LEVEL)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--variance", choices=cmp.VARIANCE_MODES, default="mean")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("style", help="style, IDK, latency and conformance summaries")
    p.add_argument("--runs", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--rules")
    p.add_argument("--models", nargs="+")
    p.add_argument("--test-set", action="append")
    p.add_argument("--prompt-id")
    p.add_argument("--out")
    p.set_defaults(func=cmd_style)

    p = sub.add_parser("gate", help="run the elimination gates")
    p.add_argument("--policy")
    p.add_argument("--profiles", required=True)
    p.add_argument("--comparisons", required=True)
    p.add_argument("--styles", required=True)
    p.add_argument("--conformance", help="JSON object of model -> conformance percentage")
    p.add_argument("--baseline")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("select", help="cheapest minimal cover of region/modality requirements")
    p.add_argument("--profiles", required=True)
    p.add_argument("--requirements", required=True)
    p.add_argument("--ranks", help="JSON model -> rank, or a comparisons file")
    p.add_argument("--gate", help="gate output; only its survivors are considered")
    p.add_argument("--exclude", nargs="+", help="profiles to leave out (e.g. the baseline)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="render results as markdown, CSV or JSON")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--format", choices=rp.FORMATS, default="markdown")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IOFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MigrationGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
