"""Posterior for the true correctness difference between two models.

For Monte Carlo sample ``s`` a (TPR, FPR) pair is drawn from the calibration
posteriors and every verdict becomes a probability of being correct:

    pass -> tpr / (tpr + fpr)
    fail -> (1 - tpr) / (2 - tpr - fpr)

The per-example differences ``d_i = p_candidate - p_baseline`` give a mean and a
variance; the sample is a normal draw around that mean. By default the variance
is that of the mean (``var(d) / n``); ``variance="per_example"`` drops the
division for sensitivity checks.

Sample ``s`` consumes only ``substream(seed, s)``, in the fixed order TPR, FPR,
normal. Samples are evaluated in fixed-size blocks, so the worker count never
changes an output bit.

Reported numbers are in percentage points, candidate minus baseline. The
reported mean is the average of the per-sample conditional means, which has the
same expectation as the average of the normal draws but without their noise;
the interval and the probability of improvement come from the full draws.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .calibration import Calibration, RatePosterior
from .dataset import PairedVerdicts, RunRecord, index_examples
from .errors import ConfigurationError, DomainError, EmptyDataError, InsufficientDataError
from .stochastics import RandomStream, StreamBank, beta_sample, substreams

DEFAULT_SEED = 20240601
DEFAULT_SAMPLES = 10_000
DEFAULT_LEVEL = 0.90
MIN_SAMPLES = 1000
BLOCK_SIZE = 2048
VARIANCE_MODES = ("mean", "per_example")


@dataclass(frozen=True)
class ComparisonResult:
    baseline: str
    candidate: str
    metric: str
    test_set: str
    delta_mean: float
    ci_low: float
    ci_high: float
    p_improvement: Optional[float]
    n_examples: int
    n_samples: Optional[int]
    seed: Optional[int]
    level: float = DEFAULT_LEVEL

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline,
            "candidate": self.candidate,
            "metric": self.metric,
            "test_set": self.test_set,
            "delta_mean_pp": self.delta_mean,
            "ci_low_pp": self.ci_low,
            "ci_high_pp": self.ci_high,
            "p_improvement": self.p_improvement,
            "n_examples": self.n_examples,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "level": self.level,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ComparisonResult":
        return cls(
            baseline=obj["baseline"],
            candidate=obj["candidate"],
            metric=obj["metric"],
            test_set=obj["test_set"],
            delta_mean=float(obj["delta_mean_pp"]),
            ci_low=float(obj["ci_low_pp"]),
            ci_high=float(obj["ci_high_pp"]),
            p_improvement=None if obj.get("p_improvement") is None else float(obj["p_improvement"]),
            n_examples=int(obj["n_examples"]),
            n_samples=obj.get("n_samples"),
            seed=obj.get("seed"),
            level=float(obj.get("level", DEFAULT_LEVEL)),
        )


@dataclass(frozen=True)
class DeltaSample:
    value: float
    sample_index: int


@dataclass(frozen=True)
class IdkRate:
    model: str
    test_set: str
    n_idk: int
    n: int

    @property
    def pct(self) -> float:
        return 100.0 * self.n_idk / self.n


def posterior_correct_prob(verdict, tpr, fpr):
    """P(answer correct | verdict, TPR, FPR) under a uniform prior on correctness.

    Accepts scalars or broadcastable arrays.
    """
    passed = tpr / (tpr + fpr)
    failed = (1.0 - tpr) / (2.0 - tpr - fpr)
    if np.ndim(verdict) == 0 and np.ndim(tpr) == 0 and np.ndim(fpr) == 0:
        return float(passed if verdict else failed)
    return np.where(verdict, passed, failed)


def _check_inputs(paired: PairedVerdicts, tpr_post: RatePosterior, fpr_post: RatePosterior) -> None:
    if tpr_post.rate_kind != "TPR" or fpr_post.rate_kind != "FPR":
        raise ConfigurationError("expected a TPR posterior and an FPR posterior")
    if (tpr_post.metric, tpr_post.test_set) != (fpr_post.metric, fpr_post.test_set):
        raise ConfigurationError("TPR and FPR posteriors come from different calibrations")
    if paired.metric and paired.metric != tpr_post.metric:
        raise ConfigurationError(f"verdicts use metric {paired.metric!r} but the calibration is for {tpr_post.metric!r}")
    if paired.test_set and paired.test_set != tpr_post.test_set:
        raise ConfigurationError(
            f"verdicts come from test set {paired.test_set!r} but the calibration is for {tpr_post.test_set!r}"
        )
    if len(paired) < 2:
        raise InsufficientDataError(f"need at least 2 paired examples, got {len(paired)}")


def _orientation(paired: PairedVerdicts) -> float:
    # the normal noise is tied to the ordered pair so that swapping the models
    # negates every sample exactly
    return 1.0 if paired.baseline_verdicts <= paired.candidate_verdicts else -1.0


def _draw_block(paired, tpr_post, fpr_post, bank: StreamBank, variance: str):
    base = np.asarray(paired.baseline_verdicts, dtype=bool)
    cand = np.asarray(paired.candidate_verdicts, dtype=bool)
    n = base.size
    tpr = beta_sample(tpr_post.params, bank)
    fpr = beta_sample(fpr_post.params, bank)
    z = bank.normals()
    p_pass = (tpr / (tpr + fpr))[:, None]
    p_fail = ((1.0 - tpr) / (2.0 - tpr - fpr))[:, None]
    d = np.where(cand, p_pass, p_fail) - np.where(base, p_pass, p_fail)
    mean = d.mean(axis=1)
    var = d.var(axis=1, ddof=1)
    if variance == "mean":
        var = var / n
    sd = np.sqrt(var)
    return mean + sd * (_orientation(paired) * z), mean


def delta_sample(
    paired: PairedVerdicts,
    tpr_post: RatePosterior,
    fpr_post: RatePosterior,
    stream: RandomStream,
    variance: str = "mean",
) -> DeltaSample:
    """One Monte Carlo draw of the difference (as a fraction, not percentage points)."""
    _check_inputs(paired, tpr_post, fpr_post)
    values, _ = _draw_block(paired, tpr_post, fpr_post, stream._bank, variance)
    return DeltaSample(float(values[0]), stream.stream_index)


def delta_draws(
    paired: PairedVerdicts,
    tpr_post: RatePosterior,
    fpr_post: RatePosterior,
    n_samples: int,
    seed: int,
    workers: int = 1,
    variance: str = "mean",
) -> tuple[np.ndarray, np.ndarray]:
    """All samples plus their conditional means, ordered by sample index (fractions)."""
    _check_inputs(paired, tpr_post, fpr_post)
    if variance not in VARIANCE_MODES:
        raise ConfigurationError(f"variance must be one of {VARIANCE_MODES}")
    if workers < 1:
        raise ConfigurationError("workers must be at least 1")
    starts = range(0, n_samples, BLOCK_SIZE)

    def run(start: int):
        bank = substreams(seed, np.arange(start, min(start + BLOCK_SIZE, n_samples), dtype=np.uint64))
        return _draw_block(paired, tpr_post, fpr_post, bank, variance)

    if workers == 1:
        blocks = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, starts))
    values = np.concatenate([b[0] for b in blocks])
    means = np.concatenate([b[1] for b in blocks])
    return values, means


def _lower_tail_quantile(sorted_values: np.ndarray, q: float) -> float:
    h = (sorted_values.size - 1) * q
    lo = math.floor(h)
    frac = h - lo
    if frac == 0.0 or lo + 1 >= sorted_values.size:
        return float(sorted_values[lo])
    return float(sorted_values[lo] + (sorted_values[lo + 1] - sorted_values[lo]) * frac)


def equal_tailed_interval(values: np.ndarray, level: float) -> tuple[float, float]:
    """Empirical quantiles at (1-level)/2 and (1+level)/2.

    The upper end is computed as the lower tail of the negated sample, so the
    interval of ``-values`` is exactly the mirror image.
    """
    tail = (1.0 - level) / 2.0
    low = _lower_tail_quantile(np.sort(values), tail)
    high = -_lower_tail_quantile(np.sort(-values), tail)
    return low, high


def probability_of_improvement(values: np.ndarray) -> float:
    # exact zeros split evenly, so identical systems score 0.5
    above = np.count_nonzero(values > 0)
    ties = np.count_nonzero(values == 0)
    return (above + 0.5 * ties) / values.size


def compare_models(
    paired: PairedVerdicts,
    tpr_post: RatePosterior,
    fpr_post: RatePosterior,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    level: float = DEFAULT_LEVEL,
    workers: int = 1,
    variance: str = "mean",
) -> ComparisonResult:
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be at least {MIN_SAMPLES}, got {n_samples}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie strictly between 0 and 1, got {level}")
    values, means = delta_draws(paired, tpr_post, fpr_post, n_samples, seed, workers, variance)
    low, high = equal_tailed_interval(values, level)
    return ComparisonResult(
        baseline=paired.baseline,
        candidate=paired.candidate,
        metric=tpr_post.metric,
        test_set=tpr_post.test_set,
        delta_mean=100.0 * float(np.mean(means)),
        ci_low=100.0 * low,
        ci_high=100.0 * high,
        p_improvement=float(probability_of_improvement(values)),
        n_examples=len(paired),
        n_samples=n_samples,
        seed=seed,
        level=level,
    )


def compare_with(paired: PairedVerdicts, calibration: Calibration, **kwargs) -> ComparisonResult:
    return compare_models(paired, calibration.tpr, calibration.fpr, **kwargs)


def idk_rate(runs: Iterable[RunRecord], model: str, test_set: str, examples) -> IdkRate:
    examples = index_examples(examples)
    n = n_idk = 0
    for r in runs:
        if r.model != model:
            continue
        ex = examples.get(r.example_id)
        if ex is None or ex.test_set != test_set:
            continue
        n += 1
        n_idk += r.is_idk
    if n == 0:
        raise EmptyDataError(f"no runs for model {model!r} on test set {test_set!r}")
    return IdkRate(model, test_set, n_idk, n)


def correctness_ranks(comparisons: Sequence[ComparisonResult]) -> dict[str, int]:
    """Rank candidates by their delta_mean averaged over test sets (1 = best)."""
    totals: dict[str, list[float]] = {}
    for c in comparisons:
        totals.setdefault(c.candidate, []).append(c.delta_mean)
    order = sorted(totals, key=lambda m: (-sum(totals[m]) / len(totals[m]), m))
    return {m: i + 1 for i, m in enumerate(order)}
