"""Non-correctness quality signals: schema conformance, style flags, word counts, latency.

The structured reply every model must produce::

    <response>
      <answer>free text</answer>
      <idk>true|false</idk>
      <citation>3</citation>      (zero or more, integer content)
    </response>

Style flags are case-insensitive substring tests. ``poor_formatting`` marks
answers that still contain markup after extraction (tag fragments or escaped
entities); a reply that fails the schema is also poorly formatted when it is
ingested through :func:`runs_from_raw`.
"""

from __future__ import annotations

import json
import re
import statistics
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .dataset import RunRecord, index_examples
from .errors import EmptyDataError, ValidationError

DEFAULT_RULES: dict[str, tuple[str, ...]] = {
    "according_to": ("according to",),
    "mention_knowledge": ("the knowledge",),
    "mention_sources": ("the sources",),
}

# tag openers/closers such as "<answer", "</response", "<br/>" and escaped entities
_MARKUP = re.compile(
    r"</?[A-Za-z][\w.:-]*(?:\s[^<>]*)?/?>|</?[A-Za-z][\w.:-]*\s*$|&(?:lt|gt|amp|quot|apos);",
    re.IGNORECASE,
)

_ALLOWED_CHILDREN = {"answer", "idk", "citation"}


@dataclass(frozen=True)
class StyleFlags:
    according_to: bool = False
    mention_knowledge: bool = False
    mention_sources: bool = False
    poor_formatting: bool = False

    @property
    def bad_style(self) -> bool:
        return self.according_to or self.mention_knowledge or self.mention_sources or self.poor_formatting


@dataclass(frozen=True)
class ConformanceResult:
    well_formed: bool
    required_tags_present: bool
    idk_flag_parseable: bool
    answer: Optional[str] = None
    is_idk: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.well_formed and self.required_tags_present and self.idk_flag_parseable


@dataclass(frozen=True)
class StyleSummary:
    model: str
    test_set: str
    n: int
    n_bad_style: int
    n_according_to: int
    n_mention_knowledge: int
    n_mention_sources: int
    n_poor_formatting: int
    median_words: int
    median_response_time: float
    n_idk: int = 0
    n_conforming: Optional[int] = None

    def __post_init__(self):
        if self.n <= 0:
            raise ValidationError("a style summary needs at least one run")

    def _pct(self, count: int) -> float:
        return 100.0 * count / self.n

    @property
    def pct_bad_style(self) -> float:
        return self._pct(self.n_bad_style)

    @property
    def pct_according_to(self) -> float:
        return self._pct(self.n_according_to)

    @property
    def pct_mention_knowledge(self) -> float:
        return self._pct(self.n_mention_knowledge)

    @property
    def pct_mention_sources(self) -> float:
        return self._pct(self.n_mention_sources)

    @property
    def pct_poor_formatting(self) -> float:
        return self._pct(self.n_poor_formatting)

    @property
    def pct_idk(self) -> float:
        return self._pct(self.n_idk)

    @property
    def conformance_rate(self) -> Optional[float]:
        return None if self.n_conforming is None else self._pct(self.n_conforming)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "test_set": self.test_set,
            "n": self.n,
            "n_bad_style": self.n_bad_style,
            "n_according_to": self.n_according_to,
            "n_mention_knowledge": self.n_mention_knowledge,
            "n_mention_sources": self.n_mention_sources,
            "n_poor_formatting": self.n_poor_formatting,
            "n_idk": self.n_idk,
            "n_conforming": self.n_conforming,
            "pct_bad_style": self.pct_bad_style,
            "pct_according_to": self.pct_according_to,
            "pct_mention_knowledge": self.pct_mention_knowledge,
            "pct_mention_sources": self.pct_mention_sources,
            "pct_poor_formatting": self.pct_poor_formatting,
            "pct_idk": self.pct_idk,
            "conformance_rate": self.conformance_rate,
            "median_words": self.median_words,
            "median_response_time": self.median_response_time,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StyleSummary":
        fields = (
            "model", "test_set", "n", "n_bad_style", "n_according_to", "n_mention_knowledge",
            "n_mention_sources", "n_poor_formatting", "median_words", "median_response_time",
        )
        kwargs = {f: obj[f] for f in fields}
        kwargs["n_idk"] = obj.get("n_idk", 0)
        kwargs["n_conforming"] = obj.get("n_conforming")
        return cls(**kwargs)


def load_rules(path: Union[str, Path]) -> dict[str, tuple[str, ...]]:
    """Read a rules file: a JSON object mapping flag names to lists of trigger substrings."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(doc) - set(DEFAULT_RULES)
    if unknown:
        raise ValidationError(f"unknown style flags in rules file: {sorted(unknown)}")
    rules = dict(DEFAULT_RULES)
    for flag, triggers in doc.items():
        if isinstance(triggers, str):
            triggers = [triggers]
        rules[flag] = tuple(t for t in triggers)
    return rules


def _fold(text: str) -> str:
    return text.upper().casefold()


def has_markup(text: str) -> bool:
    return bool(_MARKUP.search(text))


def style_flags(answer_text: str, rules: Mapping[str, Sequence[str]] = DEFAULT_RULES) -> StyleFlags:
    # upper() first so that characters whose lower/upper forms fold differently agree
    lowered = _fold(answer_text)

    def hit(flag: str) -> bool:
        return any(_fold(t) in lowered for t in rules.get(flag, ()))

    return StyleFlags(
        according_to=hit("according_to"),
        mention_knowledge=hit("mention_knowledge"),
        mention_sources=hit("mention_sources"),
        poor_formatting=has_markup(answer_text),
    )


def word_count(answer_text: str) -> int:
    return len(answer_text.split())


def check_schema(raw_output: str) -> ConformanceResult:
    try:
        root = ET.fromstring(raw_output.strip())
    except ET.ParseError:
        return ConformanceResult(False, False, False)

    answers = root.findall("answer")
    idks = root.findall("idk")
    citations = root.findall("citation")
    structure_ok = (
        root.tag == "response"
        and len(answers) == 1
        and len(idks) == 1
        and all(child.tag in _ALLOWED_CHILDREN for child in root)
        and all(_is_int((c.text or "").strip()) and len(c) == 0 for c in citations)
    )
    flag = (idks[0].text or "").strip() if len(idks) == 1 and len(idks[0]) == 0 else None
    flag_ok = flag in ("true", "false")
    answer = _inner_text(answers[0]) if len(answers) == 1 else None
    return ConformanceResult(
        well_formed=True,
        required_tags_present=structure_ok,
        idk_flag_parseable=flag_ok,
        answer=answer,
        is_idk=(flag == "true") if flag_ok else None,
    )


def _inner_text(elem: ET.Element) -> str:
    # nested elements are kept verbatim so that stray markup stays visible to the style checks
    parts = [elem.text or ""]
    parts.extend(ET.tostring(child, encoding="unicode") for child in elem)
    return "".join(parts).strip()


def _is_int(text: str) -> bool:
    return bool(re.fullmatch(r"[+-]?\d+", text))


def runs_from_raw(
    raw_runs: Iterable[dict],
) -> tuple[list[RunRecord], list[ConformanceResult]]:
    """Build run records from unparsed replies.

    Each item carries ``example_id, model, prompt_id, raw_output, response_time_s``.
    A conforming reply contributes its extracted answer and IDK flag; a
    non-conforming one keeps the raw text as the answer (so it is flagged as
    poorly formatted) and counts as not-IDK.
    """
    runs, results = [], []
    for item in raw_runs:
        res = check_schema(item["raw_output"])
        if res.passed:
            answer, idk = res.answer, res.is_idk
        else:
            answer, idk = item["raw_output"], False
        runs.append(
            RunRecord(
                example_id=item["example_id"],
                model=item["model"],
                prompt_id=item["prompt_id"],
                answer_text=answer,
                is_idk=idk,
                response_time=float(item["response_time_s"]),
                raw_output=item["raw_output"],
            )
        )
        results.append(res)
    return runs, results


def summarize_style(
    runs: Iterable[RunRecord],
    model: str,
    test_set: str,
    examples,
    rules: Mapping[str, Sequence[str]] = DEFAULT_RULES,
    prompt_id: Optional[str] = None,
) -> StyleSummary:
    """Style, IDK and latency summary for one model on one test set.

    Medians use the lower-median convention. Conformance is reported only when
    every run carries its raw reply.
    """
    examples = index_examples(examples)
    selected = [
        r for r in runs
        if r.model == model
        and (prompt_id is None or r.prompt_id == prompt_id)
        and r.example_id in examples
        and examples[r.example_id].test_set == test_set
    ]
    if not selected:
        raise EmptyDataError(f"no runs for model {model!r} on test set {test_set!r}")
    counts = dict.fromkeys(("bad", "according_to", "mention_knowledge", "mention_sources", "poor_formatting"), 0)
    n_conforming = 0
    have_raw = all(r.raw_output is not None for r in selected)
    for r in selected:
        flags = style_flags(r.answer_text, rules)
        conforming = check_schema(r.raw_output).passed if have_raw else True
        n_conforming += conforming
        poor = flags.poor_formatting or not conforming
        counts["according_to"] += flags.according_to
        counts["mention_knowledge"] += flags.mention_knowledge
        counts["mention_sources"] += flags.mention_sources
        counts["poor_formatting"] += poor
        counts["bad"] += flags.bad_style or poor
    return StyleSummary(
        model=model,
        test_set=test_set,
        n=len(selected),
        n_bad_style=counts["bad"],
        n_according_to=counts["according_to"],
        n_mention_knowledge=counts["mention_knowledge"],
        n_mention_sources=counts["mention_sources"],
        n_poor_formatting=counts["poor_formatting"],
        median_words=statistics.median_low([word_count(r.answer_text) for r in selected]),
        median_response_time=statistics.median_low([r.response_time for r in selected]),
        n_idk=sum(r.is_idk for r in selected),
        n_conforming=n_conforming if have_raw else None,
    )
