"""Metric calibration against human labels.

A metric's verdicts on a human-labelled subset give a confusion matrix; a
uniform Beta(1, 1) prior then gives conjugate posteriors

    TPR ~ Beta(tp + 1, fn + 1)        FPR ~ Beta(fp + 1, tn + 1)

Calibrations are keyed by (metric, test_set) and persisted with their raw
counts so they can be re-derived under a different prior.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

from .dataset import CalibrationPair
from .errors import CalibrationLoadError, DomainError, EmptyCalibrationError, ValidationError
from .stochastics import BetaParams, beta_quantile

log = logging.getLogger(__name__)

FORMAT_NAME = "migration-gate/calibration"
FORMAT_VERSION = 1
# fewer human-incorrect examples than this makes the FPR posterior close to the prior
MIN_NEGATIVES = 5


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError(f"confusion count {name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class RatePosterior:
    rate_kind: str  # "TPR" or "FPR"
    params: BetaParams
    source_matrix: ConfusionMatrix
    metric: str
    test_set: str

    def __post_init__(self):
        if self.rate_kind not in ("TPR", "FPR"):
            raise ValidationError(f"rate_kind must be TPR or FPR, got {self.rate_kind!r}")


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    ci_low: float
    ci_high: float
    level: float = 0.90


@dataclass(frozen=True)
class Calibration:
    """Both posteriors for one (metric, test_set)."""

    tpr: RatePosterior
    fpr: RatePosterior

    @property
    def metric(self) -> str:
        return self.tpr.metric

    @property
    def test_set(self) -> str:
        return self.tpr.test_set

    @property
    def matrix(self) -> ConfusionMatrix:
        return self.tpr.source_matrix


def confusion_matrix(pairs: Sequence[CalibrationPair]) -> ConfusionMatrix:
    if not pairs:
        raise EmptyCalibrationError("cannot build a confusion matrix from zero pairs")
    tp = fp = fn = tn = 0
    for p in pairs:
        if p.human and p.metric:
            tp += 1
        elif p.metric:
            fp += 1
        elif p.human:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def rate_posteriors(cm: ConfusionMatrix, metric: str, test_set: str) -> tuple[RatePosterior, RatePosterior]:
    if cm.fp + cm.tn < MIN_NEGATIVES:
        log.warning(
            "%s on %s: only %d human-incorrect examples; the FPR posterior is weakly identified",
            metric, test_set, cm.fp + cm.tn,
        )
    tpr = RatePosterior("TPR", BetaParams(cm.tp + 1, cm.fn + 1), cm, metric, test_set)
    fpr = RatePosterior("FPR", BetaParams(cm.fp + 1, cm.tn + 1), cm, metric, test_set)
    return tpr, fpr


def calibrate(cm: ConfusionMatrix, metric: str, test_set: str) -> Calibration:
    return Calibration(*rate_posteriors(cm, metric, test_set))


def summarize_posterior(post: Union[RatePosterior, BetaParams], level: float = 0.90) -> PosteriorSummary:
    """Analytic mean and equal-tailed credible interval."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"credible level must lie strictly between 0 and 1, got {level}")
    params = post.params if isinstance(post, RatePosterior) else post
    tail = (1.0 - level) / 2.0
    return PosteriorSummary(
        mean=params.mean,
        ci_low=beta_quantile(params, tail),
        ci_high=beta_quantile(params, 1.0 - tail),
        level=level,
    )


@dataclass(frozen=True)
class CalibrationRow:
    """One display row: both rate summaries for a (metric, test_set)."""

    test_set: str
    metric: str
    tpr: PosteriorSummary
    fpr: PosteriorSummary
    matrix: ConfusionMatrix


def summary_rows(calibrations: Iterable[Calibration], level: float = 0.90) -> list[CalibrationRow]:
    return [
        CalibrationRow(c.test_set, c.metric, summarize_posterior(c.tpr, level), summarize_posterior(c.fpr, level), c.matrix)
        for c in calibrations
    ]


# --- persistence -----------------------------------------------------------


def _entry(cal: Calibration) -> dict:
    return {
        "metric": cal.metric,
        "test_set": cal.test_set,
        "matrix": cal.matrix.to_json(),
        "tpr": {"alpha": cal.tpr.params.alpha, "beta": cal.tpr.params.beta},
        "fpr": {"alpha": cal.fpr.params.alpha, "beta": cal.fpr.params.beta},
    }


def dumps_calibration(calibrations: Iterable[Calibration], level: float = 0.90) -> str:
    cals = sorted(calibrations, key=lambda c: (c.metric, c.test_set))
    keys = [(c.metric, c.test_set) for c in cals]
    if len(set(keys)) != len(keys):
        raise ValidationError("duplicate (metric, test_set) calibration")
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "level": level,
        "calibrations": [_entry(c) for c in cals],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_calibration(calibrations: Iterable[Calibration], path: Union[str, Path], level: float = 0.90) -> None:
    Path(path).write_text(dumps_calibration(calibrations, level), encoding="utf-8")


def loads_calibration(text: str, source: str = "<memory>") -> list[Calibration]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CalibrationLoadError(f"{source}: not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CalibrationLoadError(f"{source}: not a calibration artifact")
    if doc.get("version") != FORMAT_VERSION:
        raise CalibrationLoadError(f"{source}: unsupported calibration version {doc.get('version')!r}")
    cals = []
    try:
        for e in doc["calibrations"]:
            cm = ConfusionMatrix(**{k: e["matrix"][k] for k in ("tp", "fp", "fn", "tn")})
            cal = calibrate(cm, e["metric"], e["test_set"])
            stored = (e["tpr"]["alpha"], e["tpr"]["beta"], e["fpr"]["alpha"], e["fpr"]["beta"])
            derived = (cal.tpr.params.alpha, cal.tpr.params.beta, cal.fpr.params.alpha, cal.fpr.params.beta)
            if tuple(float(s) for s in stored) != tuple(float(d) for d in derived):
                raise CalibrationLoadError(
                    f"{source}: Beta parameters for {e['metric']}/{e['test_set']} do not match the stored counts"
                )
            cals.append(cal)
    except (KeyError, TypeError, ValidationError) as exc:
        raise CalibrationLoadError(f"{source}: corrupt calibration entry ({exc})") from None
    return cals


def load_calibration(path: Union[str, Path]) -> list[Calibration]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CalibrationLoadError(f"{path}: {exc.strerror}") from None
    return loads_calibration(text, source=str(path))


def find_calibration(calibrations: Iterable[Calibration], metric: str, test_set: str) -> Calibration:
    for c in calibrations:
        if c.metric == metric and c.test_set == test_set:
            return c
    raise KeyError((metric, test_set))
