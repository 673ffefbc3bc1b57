"""The six-step migration framework as a sequence of auditable gates.

1. vetting: drop profiles not marked ``vetted``
2. conformance: drop models whose structured-output conformance rate is too low
3. measurement: comparisons, IDK rates, latencies and style are computed elsewhere
4. correctness / IDK / latency against the baseline, on every test set
5. style
6. coverage selection over (region, modality) requirements

Every decision is a :class:`GateReport` whose evidence triples are enough to
recompute it. Thresholds live in :class:`GatePolicy`; none are hard-coded.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .comparison import ComparisonResult
from .errors import ConfigurationError, EmptyCandidatePoolError, InfeasibleSelectionError, ValidationError
from .quality import StyleSummary

PASS, ELIMINATED, FLAGGED = "pass", "eliminated", "flagged"
ANY_REGION = None


class PriceTier(enum.IntEnum):
    Low = 1
    Middle = 2
    High = 3


@dataclass(frozen=True)
class ModelProfile:
    name: str
    regions: frozenset
    modalities: frozenset
    price_tier: PriceTier
    vetted: bool = True
    reasoning_variant: bool = False

    def supports(self, region: Optional[str], modality: str) -> bool:
        if modality not in self.modalities:
            return False
        return region is ANY_REGION or region in self.regions

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "regions": sorted(self.regions),
            "modalities": sorted(self.modalities),
            "price_tier": self.price_tier.name,
            "vetted": self.vetted,
            "reasoning_variant": self.reasoning_variant,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelProfile":
        try:
            tier = PriceTier[obj["price_tier"]]
        except KeyError:
            raise ValidationError(f"price_tier must be one of Low, Middle, High; got {obj.get('price_tier')!r}") from None
        return cls(
            name=obj["name"],
            regions=frozenset(obj.get("regions", ())),
            modalities=frozenset(obj.get("modalities", ())),
            price_tier=tier,
            vetted=bool(obj.get("vetted", True)),
            reasoning_variant=bool(obj.get("reasoning_variant", False)),
        )


def load_profiles(path: Union[str, Path]) -> list[ModelProfile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc["profiles"] if isinstance(doc, dict) else doc
    profiles = [ModelProfile.from_json(p) for p in items]
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ValidationError("model profile names must be unique")
    return profiles


@dataclass(frozen=True)
class GatePolicy:
    ci_lower_min: float = 0.0
    idk_ratio_max: float = 2.0
    idk_abs_increase_max: float = 10.0
    latency_ratio_max: float = 1.4
    conformance_min_rate: float = 95.0
    style_bad_max: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"policy threshold {f.name} must be finite")
        if self.idk_ratio_max <= 0 or self.latency_ratio_max <= 0:
            raise ValidationError("ratio thresholds must be positive")

    @classmethod
    def from_json(cls, obj: dict) -> "GatePolicy":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown policy keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in obj.items()})

    def to_json(self) -> dict:
        return asdict(self)


def load_policy(path: Union[str, Path, None]) -> GatePolicy:
    if path is None:
        return GatePolicy()
    return GatePolicy.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Evidence:
    quantity: str
    value: Optional[float]
    threshold: Optional[float]
    test_set: Optional[str] = None

    def to_json(self) -> dict:
        return {"quantity": self.quantity, "value": self.value, "threshold": self.threshold, "test_set": self.test_set}

    @classmethod
    def from_json(cls, obj: dict) -> "Evidence":
        return cls(obj["quantity"], obj.get("value"), obj.get("threshold"), obj.get("test_set"))


@dataclass(frozen=True)
class GateReport:
    model: str
    step: int
    outcome: str
    evidence: tuple = ()
    clauses: tuple = ()

    def __post_init__(self):
        if self.outcome not in (PASS, ELIMINATED, FLAGGED):
            raise ValidationError(f"unknown gate outcome {self.outcome!r}")
        if not 1 <= self.step <= 6:
            raise ValidationError("gate step must be between 1 and 6")

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "step": self.step,
            "outcome": self.outcome,
            "clauses": list(self.clauses),
            "evidence": [e.to_json() for e in self.evidence],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GateReport":
        return cls(
            obj["model"], int(obj["step"]), obj["outcome"],
            tuple(Evidence.from_json(e) for e in obj.get("evidence", ())), tuple(obj.get("clauses", ())),
        )


@dataclass(frozen=True)
class QualityObservation:
    """Per (model, test_set) non-correctness measurements consumed by the gates."""

    model: str
    test_set: str
    pct_idk: Optional[float] = None
    median_response_time: Optional[float] = None
    pct_bad_style: Optional[float] = None
    conformance_rate: Optional[float] = None

    @classmethod
    def from_style(cls, s: StyleSummary) -> "QualityObservation":
        return cls(s.model, s.test_set, s.pct_idk, s.median_response_time, s.pct_bad_style, s.conformance_rate)

    @classmethod
    def from_json(cls, obj: dict) -> "QualityObservation":
        def num(key):
            v = obj.get(key)
            return None if v is None else float(v)

        return cls(
            obj["model"], obj["test_set"], num("pct_idk"), num("median_response_time"),
            num("pct_bad_style"), num("conformance_rate"),
        )


@dataclass
class PipelineState:
    """Live candidates plus the ordered decision trail."""

    baseline: str
    live: list
    reports: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def record(self, reports: Sequence[GateReport]) -> None:
        before = list(self.live)
        self.reports.extend(reports)
        dropped = {r.model for r in reports if r.outcome == ELIMINATED}
        self.live = [m for m in self.live if m not in dropped]
        self.history.append((before, list(self.live)))

    def eliminated_at(self, step: int) -> set:
        return {r.model for r in self.reports if r.step == step and r.outcome == ELIMINATED}

    def to_json(self) -> dict:
        return {"baseline": self.baseline, "survivors": list(self.live), "reports": [r.to_json() for r in self.reports]}

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineState":
        return cls(obj["baseline"], list(obj["survivors"]), [GateReport.from_json(r) for r in obj["reports"]])


# --- step 1 ---------------------------------------------------------------


def filter_vetted(profiles: Sequence[ModelProfile], policy: GatePolicy = GatePolicy()):
    if not profiles:
        raise EmptyCandidatePoolError("no candidate profiles supplied")
    survivors, reports = [], []
    for p in profiles:
        ok = p.vetted
        reports.append(GateReport(p.name, 1, PASS if ok else ELIMINATED, (Evidence("vetted", float(ok), 1.0),),
                                  () if ok else ("vetting",)))
        if ok:
            survivors.append(p)
    if not survivors:
        raise EmptyCandidatePoolError("every candidate failed vetting")
    return survivors, reports


# --- step 2 ---------------------------------------------------------------


def conformance_gate(rates: Mapping[str, float], live: Sequence[str], policy: GatePolicy = GatePolicy()) -> list[GateReport]:
    """Eliminate models whose conformance rate (percent) is below the policy minimum; the bound is inclusive."""
    reports = []
    for model in live:
        if model not in rates:
            raise ConfigurationError(f"no conformance rate for live candidate {model!r}")
        rate = rates[model]
        ok = rate >= policy.conformance_min_rate
        reports.append(
            GateReport(model, 2, PASS if ok else ELIMINATED,
                       (Evidence("conformance_rate_pct", rate, policy.conformance_min_rate),),
                       () if ok else ("conformance",))
        )
    return reports


def conformance_rates(styles: Iterable[StyleSummary]) -> dict[str, float]:
    """Pooled conformance percentage per model over all test sets with raw replies."""
    good: dict[str, int] = {}
    total: dict[str, int] = {}
    for s in styles:
        if s.n_conforming is None:
            continue
        good[s.model] = good.get(s.model, 0) + s.n_conforming
        total[s.model] = total.get(s.model, 0) + s.n
    return {m: 100.0 * good[m] / total[m] for m in total}


# --- step 4 ---------------------------------------------------------------


def correctness_idk_latency_gate(
    comparisons: Sequence[ComparisonResult],
    idk_rates: Mapping[tuple, float],
    latencies: Mapping[tuple, float],
    baseline: str,
    live: Sequence[str],
    policy: GatePolicy = GatePolicy(),
    test_sets: Optional[Sequence[str]] = None,
) -> list[GateReport]:
    """Step-4 eliminations.

    ``idk_rates`` and ``latencies`` are keyed by ``(model, test_set)``. A model is
    eliminated when, on any test set, (a) the CI lower bound is below
    ``ci_lower_min``, (b) its IDK rate exceeds both ``idk_ratio_max`` times and
    ``idk_abs_increase_max`` points above the baseline's, or (c) its median
    latency exceeds ``latency_ratio_max`` times the baseline's. IDK and latency
    data are only required for models that clause (a) has not already removed.
    """
    by_key = {}
    for c in comparisons:
        if c.baseline != baseline:
            continue
        by_key[(c.candidate, c.test_set)] = c
    if test_sets is None:
        test_sets = sorted({ts for _, ts in by_key})
    if not test_sets:
        raise ConfigurationError(f"no comparisons against baseline {baseline!r}")

    reports = []
    for model in live:
        evidence, clauses = [], []
        for ts in test_sets:
            c = by_key.get((model, ts))
            if c is None:
                raise ConfigurationError(f"no comparison of {model!r} against {baseline!r} on test set {ts!r}")
            if c.ci_low < policy.ci_lower_min:
                evidence.append(Evidence("ci_low_pp", c.ci_low, policy.ci_lower_min, ts))
                if "correctness" not in clauses:
                    clauses.append("correctness")
        needs_data = not clauses
        for ts in test_sets:
            idk = idk_rates.get((model, ts))
            base_idk = idk_rates.get((baseline, ts))
            if idk is None or base_idk is None:
                if needs_data:
                    raise ConfigurationError(f"missing IDK rate for {model if idk is None else baseline!r} on {ts!r}")
            else:
                ratio = math.inf if base_idk == 0 and idk > 0 else (1.0 if base_idk == 0 else idk / base_idk)
                increase = idk - base_idk
                if ratio > policy.idk_ratio_max and increase > policy.idk_abs_increase_max:
                    evidence.append(Evidence("idk_ratio", ratio, policy.idk_ratio_max, ts))
                    evidence.append(Evidence("idk_increase_pp", increase, policy.idk_abs_increase_max, ts))
                    if "idk" not in clauses:
                        clauses.append("idk")
            lat = latencies.get((model, ts))
            base_lat = latencies.get((baseline, ts))
            if lat is None or base_lat is None:
                if needs_data:
                    raise ConfigurationError(f"missing median latency for {model if lat is None else baseline!r} on {ts!r}")
            else:
                ratio = lat / base_lat if base_lat > 0 else math.inf
                if ratio > policy.latency_ratio_max:
                    evidence.append(Evidence("latency_ratio", ratio, policy.latency_ratio_max, ts))
                    if "latency" not in clauses:
                        clauses.append("latency")
        reports.append(GateReport(model, 4, ELIMINATED if clauses else PASS, tuple(evidence), tuple(clauses)))
    return reports


# --- step 5 ---------------------------------------------------------------


def style_gate(
    bad_style: Mapping[tuple, float],
    live: Sequence[str],
    policy: GatePolicy = GatePolicy(),
) -> list[GateReport]:
    """Eliminate models above ``style_bad_max`` percent bad style on any test set.

    Models with some bad style below the limit are flagged for another prompt
    iteration; clean models pass.
    """
    reports = []
    for model in live:
        rows = sorted((ts, pct) for (m, ts), pct in bad_style.items() if m == model and pct is not None)
        if not rows:
            raise ConfigurationError(f"no style summary for live candidate {model!r}")
        over = [Evidence("bad_style_pct", pct, policy.style_bad_max, ts) for ts, pct in rows if pct > policy.style_bad_max]
        if over:
            reports.append(GateReport(model, 5, ELIMINATED, tuple(over), ("style",)))
        elif any(pct > 0 for _, pct in rows):
            ev = tuple(Evidence("bad_style_pct", pct, policy.style_bad_max, ts) for ts, pct in rows if pct > 0)
            reports.append(GateReport(model, 5, FLAGGED, ev, ("style",)))
        else:
            reports.append(GateReport(model, 5, PASS, (Evidence("bad_style_pct", 0.0, policy.style_bad_max),)))
    return reports


# --- step 6 ---------------------------------------------------------------


@dataclass(frozen=True)
class SelectionRequirements:
    """Required (region, modality) combinations; region ``None`` means any region."""

    combinations: frozenset

    def __post_init__(self):
        if not self.combinations:
            raise ValidationError("selection requirements must not be empty")

    @classmethod
    def cross(cls, regions: Iterable[str], modalities: Iterable[str], anywhere: Iterable[str] = ()):
        combos = {(r, m) for r in regions for m in modalities}
        combos |= {(ANY_REGION, m) for m in anywhere}
        return cls(frozenset(combos))

    @property
    def required_regions(self) -> set:
        return {r for r, _ in self.combinations if r is not ANY_REGION}

    @property
    def required_modalities(self) -> set:
        return {m for _, m in self.combinations}

    @classmethod
    def from_json(cls, obj: dict) -> "SelectionRequirements":
        combos = {(c.get("region"), c["modality"]) for c in obj.get("combinations", ())}
        cross = cls.cross(obj.get("regions", ()), obj.get("modalities", ()), obj.get("anywhere", ())) if (
            obj.get("regions") or obj.get("anywhere")) else None
        if cross is not None:
            combos |= set(cross.combinations)
        return cls(frozenset(combos))

    def sorted_combinations(self) -> list:
        return sorted(self.combinations, key=lambda c: (c[0] is not ANY_REGION, c[0] or "", c[1]))


def load_requirements(path: Union[str, Path]) -> SelectionRequirements:
    return SelectionRequirements.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SelectionResult:
    chosen: frozenset
    assignment: dict
    total_price_score: int
    rationale: str

    def to_json(self) -> dict:
        return {
            "chosen": sorted(self.chosen),
            "assignment": [
                {"region": r, "modality": m, "model": self.assignment[(r, m)]}
                for r, m in sorted(self.assignment, key=lambda c: (c[0] is not ANY_REGION, c[0] or "", c[1]))
            ],
            "total_price_score": self.total_price_score,
            "rationale": self.rationale,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SelectionResult":
        assignment = {(a["region"], a["modality"]): a["model"] for a in obj["assignment"]}
        return cls(frozenset(obj["chosen"]), assignment, int(obj["total_price_score"]), obj["rationale"])


def _covers(subset: Sequence[ModelProfile], combos) -> bool:
    return all(any(p.supports(r, m) for p in subset) for r, m in combos)


def select_models(
    profiles: Sequence[ModelProfile],
    requirements: SelectionRequirements,
    ranks: Optional[Mapping[str, int]] = None,
) -> SelectionResult:
    """Minimum-cardinality cover of the requirements by exhaustive subset search.

    Ties are broken by total price score (Low=1, Middle=2, High=3), then by the
    summed correctness rank (lower is better), then by name.
    """
    ranks = dict(ranks or {})
    worst = len(profiles) + 1
    pool = sorted(profiles, key=lambda p: p.name)
    combos = requirements.sorted_combinations()
    uncovered = [c for c in combos if not any(p.supports(*c) for p in pool)]
    if uncovered:
        raise InfeasibleSelectionError(uncovered)

    def rank(p: ModelProfile) -> int:
        return ranks.get(p.name, worst)

    best = None
    for k in range(1, len(pool) + 1):
        feasible = [s for s in itertools.combinations(pool, k) if _covers(s, combos)]
        if feasible:
            best = min(
                feasible,
                key=lambda s: (sum(p.price_tier for p in s), sum(rank(p) for p in s), tuple(p.name for p in s)),
            )
            break
    assert best is not None  # the full pool covers everything once no combination is uncovered

    assignment = {}
    for r, m in combos:
        options = [p for p in best if p.supports(r, m)]
        pick = min(options, key=lambda p: (p.price_tier, rank(p), p.name))
        assignment[(r, m)] = pick.name
    price = sum(int(p.price_tier) for p in best)
    names = ", ".join(p.name for p in best)
    rationale = (
        f"{len(best)} model(s) are the fewest that cover all {len(combos)} required combinations; "
        f"among such covers {{{names}}} has the lowest total price score ({price})"
    )
    if ranks:
        rationale += f" and then the best summed correctness rank ({sum(rank(p) for p in best)})"
    return SelectionResult(frozenset(p.name for p in best), assignment, price, rationale)


def is_minimal_cover(profiles: Sequence[ModelProfile], chosen: Iterable[str], requirements: SelectionRequirements) -> bool:
    """True when ``chosen`` covers the requirements and no proper subset does."""
    by_name = {p.name: p for p in profiles}
    subset = [by_name[n] for n in chosen]
    combos = requirements.sorted_combinations()
    if not _covers(subset, combos):
        return False
    for k in range(len(subset)):
        for smaller in itertools.combinations(subset, k):
            if _covers(smaller, combos):
                return False
    return True


# --- orchestration ----------------------------------------------------------


@dataclass
class PipelineResult:
    state: PipelineState
    selection: Optional[SelectionResult] = None


def run_gates(
    profiles: Sequence[ModelProfile],
    comparisons: Sequence[ComparisonResult],
    observations: Sequence[QualityObservation],
    baseline: Optional[str] = None,
    policy: GatePolicy = GatePolicy(),
    conformance: Optional[Mapping[str, float]] = None,
) -> PipelineState:
    """Steps 1, 2, 4 and 5 over every profile except the baseline.

    Conformance rates come from ``conformance`` or, failing that, from the
    observations; step 2 is skipped (with no reports) when neither has any.
    """
    if baseline is None:
        bases = {c.baseline for c in comparisons}
        if len(bases) != 1:
            raise ConfigurationError(f"cannot infer a unique baseline from comparisons: {sorted(bases)}")
        baseline = bases.pop()
    candidates = [p for p in profiles if p.name != baseline]
    vetted, reports = filter_vetted(candidates, policy)
    state = PipelineState(baseline=baseline, live=[p.name for p in candidates])
    state.record(reports)

    if conformance is None:
        conformance = {}
        pooled: dict[str, list] = {}
        for o in observations:
            if o.conformance_rate is not None:
                pooled.setdefault(o.model, []).append(o.conformance_rate)
        conformance = {m: min(v) for m, v in pooled.items()}
    if conformance:
        state.record(conformance_gate(conformance, state.live, policy))

    idk = {(o.model, o.test_set): o.pct_idk for o in observations if o.pct_idk is not None}
    lat = {(o.model, o.test_set): o.median_response_time for o in observations if o.median_response_time is not None}
    state.record(correctness_idk_latency_gate(comparisons, idk, lat, baseline, state.live, policy))

    bad = {(o.model, o.test_set): o.pct_bad_style for o in observations if o.pct_bad_style is not None}
    state.record(style_gate(bad, state.live, policy))
    return state


def run_pipeline(
    profiles: Sequence[ModelProfile],
    comparisons: Sequence[ComparisonResult],
    observations: Sequence[QualityObservation],
    requirements: Optional[SelectionRequirements] = None,
    baseline: Optional[str] = None,
    policy: GatePolicy = GatePolicy(),
    conformance: Optional[Mapping[str, float]] = None,
    ranks: Optional[Mapping[str, int]] = None,
) -> PipelineResult:
    state = run_gates(profiles, comparisons, observations, baseline, policy, conformance)
    selection = None
    if requirements is not None:
        survivors = [p for p in profiles if p.name in state.live]
        if not survivors:
            raise EmptyCandidatePoolError("no candidates survived the gates")
        if ranks is None:
            from .comparison import correctness_ranks

            ranks = correctness_ranks([c for c in comparisons if c.candidate in state.live])
        selection = select_models(survivors, requirements, ranks)
    return PipelineResult(state, selection)
