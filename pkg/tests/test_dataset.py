import json

import pytest

from migration_gate.dataset import (
    Corpus,
    LabelRecord,
    RunRecord,
    TestExample,
    VerdictRecord,
    align_paired_runs,
    dump_records,
    join_calibration,
    load_records,
    parse_records,
)
from migration_gate.errors import (
    AlignmentError,
    ConfigurationError,
    EmptyCalibrationError,
    RecordParseError,
    ValidationError,
)
from migration_gate.fixtures import demo


def ex(i, ts="hotpot"):
    return TestExample(f"e{i}", ts, f"q{i}?", (f"ctx {i}",), f"gt {i}.")


def lines(*objs):
    return [json.dumps(o) for o in objs]


def test_parse_examples_roundtrip(tmp_path):
    recs = [ex(1), ex(2, "basic")]
    dump_records(recs, tmp_path / "x.jsonl")
    assert list(load_records(tmp_path / "x.jsonl", "examples")) == recs


def test_malformed_line_names_line_number():
    with pytest.raises(RecordParseError) as info:
        parse_records([json.dumps({"example_id": "a", "model": "m", "raw_label": "correct"}), "{not json"], "labels", source="labels.jsonl")
    assert info.value.line == 2


def test_missing_field_is_parse_error():
    with pytest.raises(RecordParseError):
        parse_records(lines({"example_id": "a", "model": "m"}), "labels")


def test_duplicate_run_key_rejected():
    run = {"example_id": "a", "model": "m", "prompt_id": "p", "answer_text": "x", "is_idk": False, "response_time_s": 1.0}
    with pytest.raises(ValidationError, match="duplicate"):
        parse_records(lines(run, run), "runs")


def test_negative_response_time_rejected():
    with pytest.raises(ValidationError):
        RunRecord("a", "m", "p", "x", False, -0.1)


def test_bad_verdict_and_label_values():
    with pytest.raises(ValidationError):
        VerdictRecord("a", "m", "metric", "maybe")
    with pytest.raises(ValidationError):
        LabelRecord("a", "m", "great")


@pytest.mark.parametrize("raw,binary", [("correct", True), ("incorrect", False), ("incomplete", False),
                                        ("irrelevant", False), ("idk", False)])
def test_label_binarisation(raw, binary):
    assert LabelRecord("a", "m", raw).binary_label is binary


def test_join_calibration_dangling_reference():
    labels = [LabelRecord("nope", "m", "correct")]
    with pytest.raises(ValidationError, match="dangling"):
        join_calibration(labels, [VerdictRecord("nope", "m", "k", "pass")], "k", "hotpot", [ex(1)])


def test_join_calibration_empty():
    with pytest.raises(EmptyCalibrationError):
        join_calibration([LabelRecord("e1", "m", "correct")], [], "k", "hotpot", [ex(1)])


def test_join_calibration_filters_by_test_set_and_metric():
    exs = [ex(1), ex(2, "basic")]
    labels = [LabelRecord("e1", "m", "correct"), LabelRecord("e2", "m", "idk")]
    verdicts = [VerdictRecord("e1", "m", "k", "fail"), VerdictRecord("e1", "m", "other", "pass"),
                VerdictRecord("e2", "m", "k", "pass")]
    pairs = join_calibration(labels, verdicts, "k", "hotpot", exs)
    assert [(p.human, p.metric) for p in pairs] == [(True, False)]


def _verdicts(model, passes):
    return [VerdictRecord(f"e{i}", model, "k", "pass" if p else "fail") for i, p in enumerate(passes)]


def test_align_drops_unpaired_and_sorts():
    exs = [ex(i) for i in range(4)]
    vs = _verdicts("A", [1, 0, 1, 1]) + _verdicts("B", [0, 0, 1])
    paired = align_paired_runs(vs, "A", "B", "k", "hotpot", exs)
    assert paired.example_ids == ("e0", "e1", "e2")
    assert paired.baseline_verdicts == (True, False, True)
    assert paired.candidate_verdicts == (False, False, True)
    assert paired.n_dropped == 1


def test_align_exclude_idk():
    exs = [ex(i) for i in range(3)]
    vs = _verdicts("A", [1, 0, 1]) + _verdicts("B", [1, 1, 0])
    runs = [RunRecord("e2", "B", "p", "I don't know.", True, 0.5)]
    assert len(align_paired_runs(vs, "A", "B", "k", "hotpot", exs, runs=runs, exclude_idk=True)) == 2
    with pytest.raises(ConfigurationError):
        align_paired_runs(vs, "A", "B", "k", "hotpot", exs, exclude_idk=True)


def test_align_nothing_shared():
    with pytest.raises(AlignmentError):
        align_paired_runs(_verdicts("A", [1]), "A", "B", "k", "hotpot", [ex(0)])


def test_swapped_exchanges_roles():
    paired = align_paired_runs(_verdicts("A", [1, 0]) + _verdicts("B", [0, 0]), "A", "B", "k", "hotpot",
                               [ex(0), ex(1)])
    s = paired.swapped()
    assert (s.baseline, s.candidate) == ("B", "A")
    assert s.baseline_verdicts == paired.candidate_verdicts


def test_demo_corpus_loads_cleanly():
    corpus = Corpus.load(demo("examples.jsonl"), demo("runs.jsonl"), demo("verdicts.jsonl"), demo("labels.jsonl"))
    assert len(corpus.examples) == 294
    assert len(corpus.runs) == 294 * 13
    assert len(corpus.runs_for("Nova Pro", "basic")) == 94
