import json

import pytest
from hypothesis import given, settings, strategies as st

from migration_gate.comparison import ComparisonResult
from migration_gate.errors import ConfigurationError, EmptyCandidatePoolError, InfeasibleSelectionError, ValidationError
from migration_gate.pipeline import (
    ELIMINATED,
    FLAGGED,
    PASS,
    GatePolicy,
    GateReport,
    ModelProfile,
    PipelineState,
    PriceTier,
    QualityObservation,
    SelectionRequirements,
    SelectionResult,
    conformance_gate,
    correctness_idk_latency_gate,
    filter_vetted,
    is_minimal_cover,
    run_gates,
    select_models,
    style_gate,
)

from oracles import brute_force_cover


def prof(name, regions=("R1",), modalities=("text",), tier="Low", vetted=True):
    return ModelProfile(name, frozenset(regions), frozenset(modalities), PriceTier[tier], vetted)


def comp(cand, ts="t", ci_low=1.0, base="B"):
    return ComparisonResult(base, cand, "k", ts, ci_low + 2, ci_low, ci_low + 4, 0.9, 50, 1000, 1)


def test_policy_from_json_rejects_unknown_keys():
    assert GatePolicy.from_json({"latency_ratio_max": 2}).latency_ratio_max == 2.0
    with pytest.raises(ValidationError):
        GatePolicy.from_json({"latency_max": 2})
    with pytest.raises(ValidationError):
        GatePolicy(idk_ratio_max=0)


def test_vetting():
    survivors, reports = filter_vetted([prof("a"), prof("b", vetted=False)])
    assert [p.name for p in survivors] == ["a"]
    assert [r.outcome for r in reports] == [PASS, ELIMINATED]
    with pytest.raises(EmptyCandidatePoolError):
        filter_vetted([prof("b", vetted=False)])


def test_conformance_bound_is_inclusive():
    reports = conformance_gate({"a": 95.0, "b": 94.9}, ["a", "b"])
    assert [r.outcome for r in reports] == [PASS, ELIMINATED]
    with pytest.raises(ConfigurationError):
        conformance_gate({}, ["a"])


def _gate(ci=1.0, idk=5.0, base_idk=5.0, lat=1.0, base_lat=1.0, **policy):
    return correctness_idk_latency_gate(
        [comp("X", ci_low=ci)], {("X", "t"): idk, ("B", "t"): base_idk},
        {("X", "t"): lat, ("B", "t"): base_lat}, "B", ["X"], GatePolicy(**policy),
    )[0]


@pytest.mark.parametrize("kwargs,clauses", [
    ({}, ()),
    ({"ci": -0.1}, ("correctness",)),
    ({"ci": 0.0}, ()),
    ({"idk": 16.0}, ("idk",)),              # 3.2x and +11 points
    ({"idk": 14.0}, ()),                    # ratio high, increase only 9
    ({"idk": 30.0, "base_idk": 20.0}, ()),  # +10 points but ratio 1.5
    ({"lat": 1.41}, ("latency",)),
    ({"lat": 1.4}, ()),
    ({"ci": -1, "lat": 2.0}, ("correctness", "latency")),
])
def test_step_four_clauses(kwargs, clauses):
    r = _gate(**kwargs)
    assert r.clauses == clauses
    assert r.outcome == (ELIMINATED if clauses else PASS)


def test_zero_baseline_idk():
    assert _gate(idk=11.0, base_idk=0.0).clauses == ("idk",)
    assert _gate(idk=0.0, base_idk=0.0).clauses == ()


def test_correctness_failures_need_no_other_data():
    r = correctness_idk_latency_gate([comp("X", ci_low=-3)], {}, {}, "B", ["X"])[0]
    assert r.clauses == ("correctness",)
    with pytest.raises(ConfigurationError, match="IDK"):
        correctness_idk_latency_gate([comp("X")], {}, {}, "B", ["X"])


def test_missing_comparison_is_configuration_error():
    with pytest.raises(ConfigurationError):
        correctness_idk_latency_gate([comp("X")], {}, {}, "B", ["X", "Y"])


def test_style_gate_outcomes():
    data = {("a", "t"): 0.0, ("b", "t"): 2.0, ("c", "t"): 5.0, ("d", "t"): 7.5, ("d", "u"): 0.0}
    reports = {r.model: r for r in style_gate(data, ["a", "b", "c", "d"])}
    assert [reports[m].outcome for m in "abcd"] == [PASS, FLAGGED, FLAGGED, ELIMINATED]
    assert reports["d"].evidence[0].value == 7.5
    with pytest.raises(ConfigurationError):
        style_gate(data, ["e"])


def test_run_gates_order_and_trail():
    profiles = [prof("B"), prof("X"), prof("Y"), prof("Z", vetted=False)]
    comps = [comp("X"), comp("Y", ci_low=-2)]
    obs = [QualityObservation(m, "t", 5.0, 1.0, 0.0, 100.0) for m in "BXY"]
    state = run_gates(profiles, comps, obs)
    assert state.baseline == "B"
    assert state.live == ["X"]
    assert state.eliminated_at(1) == {"Z"}
    assert state.eliminated_at(4) == {"Y"}
    assert [r.step for r in state.reports] == [1, 1, 1, 2, 2, 4, 4, 5]
    back = PipelineState.from_json(json.loads(json.dumps(state.to_json())))
    assert back.reports == state.reports and back.live == state.live


def test_gate_report_validation():
    with pytest.raises(ValidationError):
        GateReport("m", 7, PASS)
    with pytest.raises(ValidationError):
        GateReport("m", 2, "maybe")


REQ = SelectionRequirements.cross(["R1", "R2"], ["text"], anywhere=["files"])


def test_selection_prefers_fewest_then_cheapest_then_rank():
    profiles = [
        prof("wide", ("R1", "R2"), ("text", "files"), "High"),
        prof("r1", ("R1",), ("text", "files"), "Low"),
        prof("r2", ("R2",), ("text",), "Low"),
    ]
    assert select_models(profiles, REQ).chosen == {"wide"}
    profiles.append(prof("wide2", ("R1", "R2"), ("text", "files"), "High"))
    assert select_models(profiles, REQ, {"wide2": 1, "wide": 2}).chosen == {"wide2"}


def test_selection_infeasible():
    with pytest.raises(InfeasibleSelectionError):
        select_models([prof("a")], REQ)


def test_selection_json_roundtrip():
    res = select_models([prof("a", ("R1", "R2"), ("text", "files"))], REQ)
    assert SelectionResult.from_json(json.loads(json.dumps(res.to_json()))) == res
    assert res.assignment[(None, "files")] == "a"


def test_requirements_from_json():
    req = SelectionRequirements.from_json({"regions": ["R1"], "modalities": ["text"],
                                           "combinations": [{"modality": "files"}]})
    assert req.combinations == {("R1", "text"), (None, "files")}
    with pytest.raises(ValidationError):
        SelectionRequirements.from_json({})


_names = [f"m{i}" for i in range(7)]
_region_sets = st.sets(st.sampled_from(["R1", "R2", "R3"]), min_size=1)
_mod_sets = st.sets(st.sampled_from(["text", "files"]), min_size=1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(_region_sets, _mod_sets, st.sampled_from(["Low", "Middle", "High"])),
                min_size=1, max_size=7))
def test_selection_matches_brute_force(specs):
    profiles = [prof(_names[i], r, m, t) for i, (r, m, t) in enumerate(specs)]
    combos = REQ.combinations
    covers = brute_force_cover({p.name: (p.regions, p.modalities) for p in profiles}, combos)
    if not covers:
        with pytest.raises(InfeasibleSelectionError):
            select_models(profiles, REQ)
        return
    res = select_models(profiles, REQ)
    assert len(res.chosen) == len(covers[0])
    assert res.chosen in covers
    tiers = {p.name: int(p.price_tier) for p in profiles}
    assert res.total_price_score == min(sum(tiers[m] for m in c) for c in covers)
    assert is_minimal_cover(profiles, res.chosen, REQ)
