"""Evaluation corpus records: loading, validation and the joins the statistics need.

Four line-delimited JSON streams make up a corpus:

* examples  ``{id, test_set, question, contexts, ground_truth}``
* runs      ``{example_id, model, prompt_id, answer_text, is_idk, response_time_s}``
  (optionally ``raw_output``, the unparsed model reply)
* verdicts  ``{example_id, model, metric, verdict}`` with verdict ``pass``/``fail``
* labels    ``{example_id, model, raw_label}``

Loaders check each record against its invariants and reject duplicate keys.
References between streams are resolved at join time, where a dangling
``example_id`` raises :class:`~migration_gate.errors.ValidationError`.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import AlignmentError, ConfigurationError, EmptyCalibrationError, RecordParseError, ValidationError

log = logging.getLogger(__name__)

RAW_LABELS = ("correct", "incomplete", "irrelevant", "incorrect", "idk")
VERDICTS = ("pass", "fail")


@dataclass(frozen=True)
class TestExample:
    __test__ = False  # keep pytest from collecting this class

    id: str
    test_set: str
    question: str
    contexts: tuple[str, ...]
    ground_truth: str

    def __post_init__(self):
        _require_name(self.id, "id")
        _require_name(self.test_set, "test_set")
        if not self.contexts:
            raise ValidationError(f"example {self.id!r} has no contexts")
        object.__setattr__(self, "contexts", tuple(self.contexts))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "test_set": self.test_set,
            "question": self.question,
            "contexts": list(self.contexts),
            "ground_truth": self.ground_truth,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TestExample":
        contexts = obj["contexts"]
        if not isinstance(contexts, list) or not all(isinstance(c, str) for c in contexts):
            raise ValidationError("contexts must be an array of strings")
        return cls(
            id=_str(obj, "id"),
            test_set=_str(obj, "test_set"),
            question=_str(obj, "question"),
            contexts=tuple(contexts),
            ground_truth=_str(obj, "ground_truth"),
        )

    @property
    def key(self):
        return self.id


@dataclass(frozen=True)
class RunRecord:
    example_id: str
    model: str
    prompt_id: str
    answer_text: str
    is_idk: bool
    response_time: float
    raw_output: Optional[str] = None

    def __post_init__(self):
        _require_name(self.example_id, "example_id")
        _require_name(self.model, "model")
        if not isinstance(self.is_idk, bool):
            raise ValidationError("is_idk must be a boolean")
        if not (isinstance(self.response_time, (int, float)) and math.isfinite(self.response_time)):
            raise ValidationError("response_time_s must be a finite number")
        if self.response_time < 0:
            raise ValidationError(f"response_time_s must be non-negative, got {self.response_time}")

    def to_json(self) -> dict:
        obj = {
            "example_id": self.example_id,
            "model": self.model,
            "prompt_id": self.prompt_id,
            "answer_text": self.answer_text,
            "is_idk": self.is_idk,
            "response_time_s": self.response_time,
        }
        if self.raw_output is not None:
            obj["raw_output"] = self.raw_output
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        raw = obj.get("raw_output")
        if raw is not None and not isinstance(raw, str):
            raise ValidationError("raw_output must be a string")
        rt = obj["response_time_s"]
        if isinstance(rt, bool) or not isinstance(rt, (int, float)):
            raise ValidationError("response_time_s must be a number")
        return cls(
            example_id=_str(obj, "example_id"),
            model=_str(obj, "model"),
            prompt_id=_str(obj, "prompt_id"),
            answer_text=_str(obj, "answer_text"),
            is_idk=obj["is_idk"],
            response_time=float(rt),
            raw_output=raw,
        )

    @property
    def key(self):
        return (self.example_id, self.model, self.prompt_id)


@dataclass(frozen=True)
class VerdictRecord:
    example_id: str
    model: str
    metric: str
    verdict: str

    def __post_init__(self):
        _require_name(self.example_id, "example_id")
        _require_name(self.model, "model")
        _require_name(self.metric, "metric")
        if self.verdict not in VERDICTS:
            raise ValidationError(f"verdict must be 'pass' or 'fail', got {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return {"example_id": self.example_id, "model": self.model, "metric": self.metric, "verdict": self.verdict}

    @classmethod
    def from_json(cls, obj: dict) -> "VerdictRecord":
        return cls(_str(obj, "example_id"), _str(obj, "model"), _str(obj, "metric"), _str(obj, "verdict"))

    @property
    def key(self):
        return (self.example_id, self.model, self.metric)


@dataclass(frozen=True)
class LabelRecord:
    example_id: str
    model: str
    raw_label: str

    def __post_init__(self):
        _require_name(self.example_id, "example_id")
        _require_name(self.model, "model")
        if self.raw_label not in RAW_LABELS:
            raise ValidationError(f"raw_label must be one of {RAW_LABELS}, got {self.raw_label!r}")

    @property
    def binary_label(self) -> bool:
        """True (correct) only for ``raw_label == 'correct'``; idk and partial answers are incorrect."""
        return self.raw_label == "correct"

    def to_json(self) -> dict:
        return {"example_id": self.example_id, "model": self.model, "raw_label": self.raw_label}

    @classmethod
    def from_json(cls, obj: dict) -> "LabelRecord":
        return cls(_str(obj, "example_id"), _str(obj, "model"), _str(obj, "raw_label"))

    @property
    def key(self):
        return (self.example_id, self.model)


@dataclass(frozen=True)
class CalibrationPair:
    human: bool
    metric: bool
    example_id: str
    model: str


@dataclass(frozen=True)
class PairedVerdicts:
    example_ids: tuple[str, ...]
    baseline_verdicts: tuple[bool, ...]
    candidate_verdicts: tuple[bool, ...]
    baseline: str = ""
    candidate: str = ""
    metric: str = ""
    test_set: str = ""
    n_dropped: int = 0

    def __post_init__(self):
        n = len(self.example_ids)
        if len(self.baseline_verdicts) != n or len(self.candidate_verdicts) != n:
            raise ValidationError("verdict vectors must match the number of example ids")

    def __len__(self) -> int:
        return len(self.example_ids)

    def swapped(self) -> "PairedVerdicts":
        return PairedVerdicts(
            self.example_ids,
            self.candidate_verdicts,
            self.baseline_verdicts,
            baseline=self.candidate,
            candidate=self.baseline,
            metric=self.metric,
            test_set=self.test_set,
            n_dropped=self.n_dropped,
        )


RECORD_TYPES = {
    "examples": TestExample,
    "runs": RunRecord,
    "verdicts": VerdictRecord,
    "labels": LabelRecord,
}

Record = Union[TestExample, RunRecord, VerdictRecord, LabelRecord]


def _str(obj: dict, name: str) -> str:
    value = obj[name]
    if not isinstance(value, str):
        raise ValidationError(f"field {name!r} must be a string")
    return value


def _require_name(value, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{what} must be a non-empty string")


def parse_records(lines: Iterable[str], kind: str, source: str = "<memory>") -> list:
    """Parse JSON lines of one record kind. Blank lines are skipped."""
    try:
        cls = RECORD_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown record kind {kind!r}; expected one of {sorted(RECORD_TYPES)}") from None
    records = []
    seen: dict = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordParseError(source, lineno, f"malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise RecordParseError(source, lineno, "expected a JSON object")
        try:
            rec = cls.from_json(obj)
        except KeyError as exc:
            raise RecordParseError(source, lineno, f"missing field {exc.args[0]!r}") from None
        except ValidationError as exc:
            raise ValidationError(f"{source}:{lineno}: {exc}") from None
        if rec.key in seen:
            raise ValidationError(f"{source}:{lineno}: duplicate key {rec.key!r} (first seen on line {seen[rec.key]})")
        seen[rec.key] = lineno
        records.append(rec)
    return records


def load_records(path: Union[str, Path], kind: str) -> tuple:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return tuple(parse_records(fh, kind, source=str(path)))


def dump_records(records: Iterable[Record], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def index_examples(examples: Union[Mapping[str, TestExample], Iterable[TestExample]]) -> dict:
    if isinstance(examples, Mapping):
        return dict(examples)
    index = {}
    for ex in examples:
        if ex.id in index:
            raise ValidationError(f"duplicate example id {ex.id!r}")
        index[ex.id] = ex
    return index


def _test_set_of(example_id: str, examples: dict) -> str:
    try:
        return examples[example_id].test_set
    except KeyError:
        raise ValidationError(f"dangling example_id {example_id!r}: not present in the examples file") from None


def join_calibration(
    labels: Sequence[LabelRecord],
    verdicts: Sequence[VerdictRecord],
    metric: str,
    test_set: str,
    examples,
) -> list[CalibrationPair]:
    """Pair each human label with the metric's verdict on the same (example, model)."""
    examples = index_examples(examples)
    by_key = {}
    for v in verdicts:
        if v.metric == metric:
            by_key[(v.example_id, v.model)] = v
    pairs = []
    for lab in labels:
        if _test_set_of(lab.example_id, examples) != test_set:
            continue
        v = by_key.get((lab.example_id, lab.model))
        if v is None:
            continue
        _test_set_of(v.example_id, examples)
        pairs.append(CalibrationPair(lab.binary_label, v.passed, lab.example_id, lab.model))
    if not pairs:
        raise EmptyCalibrationError(f"no labelled examples have a {metric!r} verdict on test set {test_set!r}")
    pairs.sort(key=lambda p: (p.example_id, p.model))
    return pairs


def align_paired_runs(
    verdicts: Sequence[VerdictRecord],
    baseline: str,
    candidate: str,
    metric: str,
    test_set: str,
    examples,
    runs: Optional[Sequence[RunRecord]] = None,
    exclude_idk: bool = False,
) -> PairedVerdicts:
    """Paired verdict vectors over the examples both models were judged on.

    With ``exclude_idk`` every example on which either model answered IDK is
    dropped (``runs`` must then be supplied); otherwise IDK answers enter as
    whatever the metric judged them, normally ``fail``.
    """
    examples = index_examples(examples)
    base: dict = {}
    cand: dict = {}
    for v in verdicts:
        if v.metric != metric or v.model not in (baseline, candidate):
            continue
        if _test_set_of(v.example_id, examples) != test_set:
            continue
        if v.model == baseline:
            base[v.example_id] = v.passed
        if v.model == candidate:
            cand[v.example_id] = v.passed
    shared = set(base) & set(cand)
    if exclude_idk:
        if runs is None:
            raise ConfigurationError("exclude_idk requires the run records")
        idk = {r.example_id for r in runs if r.is_idk and r.model in (baseline, candidate)}
        shared -= idk
    if not shared:
        raise AlignmentError(
            f"no {metric!r} verdicts on test set {test_set!r} are shared by {baseline!r} and {candidate!r}"
        )
    dropped = len(set(base) | set(cand)) - len(shared)
    if dropped:
        log.warning("dropped %d unpaired examples aligning %s vs %s on %s", dropped, baseline, candidate, test_set)
    ids = tuple(sorted(shared))
    return PairedVerdicts(
        ids,
        tuple(base[i] for i in ids),
        tuple(cand[i] for i in ids),
        baseline=baseline,
        candidate=candidate,
        metric=metric,
        test_set=test_set,
        n_dropped=dropped,
    )


@dataclass(frozen=True)
class Corpus:
    """The four record streams loaded together."""

    examples: dict = field(default_factory=dict)
    runs: tuple = ()
    verdicts: tuple = ()
    labels: tuple = ()

    @classmethod
    def load(cls, examples=None, runs=None, verdicts=None, labels=None) -> "Corpus":
        return cls(
            examples=index_examples(load_records(examples, "examples")) if examples else {},
            runs=load_records(runs, "runs") if runs else (),
            verdicts=load_records(verdicts, "verdicts") if verdicts else (),
            labels=load_records(labels, "labels") if labels else (),
        )

    def runs_for(self, model: str, test_set: str) -> list[RunRecord]:
        return [r for r in self.runs if r.model == model and _test_set_of(r.example_id, self.examples) == test_set]
