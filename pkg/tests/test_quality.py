import json

import pytest

from migration_gate.dataset import Corpus, RunRecord, TestExample
from migration_gate.errors import EmptyDataError, ValidationError
from migration_gate.fixtures import case_study, demo
from migration_gate.quality import (
    check_schema,
    load_rules,
    runs_from_raw,
    style_flags,
    summarize_style,
    word_count,
)

from oracles import lower_median

GOOD = "<response><answer>Paris.</answer><idk>false</idk><citation>2</citation></response>"


@pytest.mark.parametrize("text,expected", [
    ("According to the passage, 4.", (True, False, False, False)),
    ("ACCORDING TO records", (True, False, False, False)),
    ("Based on the knowledge provided", (False, True, False, False)),
    ("As the sources say", (False, False, True, False)),
    ("Line one<br/>line two", (False, False, False, True)),
    ("a &lt;b&gt; c", (False, False, False, True)),
    ("x < y and y > z", (False, False, False, False)),
    ("Plain answer.", (False, False, False, False)),
    ("according to the knowledge and the sources<b>", (True, True, True, True)),
])
def test_style_flag_truth_table(text, expected):
    f = style_flags(text)
    assert (f.according_to, f.mention_knowledge, f.mention_sources, f.poor_formatting) == expected
    assert f.bad_style == any(expected)


def test_conforming_reply():
    r = check_schema(GOOD)
    assert r.passed and r.answer == "Paris." and r.is_idk is False


def test_reply_without_citations_conforms():
    assert check_schema("<response><answer>x</answer><idk>true</idk></response>").is_idk is True


@pytest.mark.parametrize("raw,well_formed,tags,flag", [
    ("<response><answer>x</answer><idk>false</idk>", False, False, False),            # not well formed
    ("<reply><answer>x</answer><idk>false</idk></reply>", True, False, True),          # wrong root
    ("<response><idk>false</idk></response>", True, False, True),                     # no answer
    ("<response><answer>x</answer></response>", True, False, False),                  # no idk
    ("<response><answer>x</answer><idk>maybe</idk></response>", True, True, False),    # idk not boolean
    ("<response><answer>x</answer><idk>false</idk><citation>two</citation></response>", True, False, True),
    ("<response><answer>x</answer><idk>false</idk><note/></response>", True, False, True),
])
def test_malformed_replies(raw, well_formed, tags, flag):
    r = check_schema(raw)
    assert (r.well_formed, r.required_tags_present, r.idk_flag_parseable) == (well_formed, tags, flag)
    assert not r.passed


def test_nested_markup_in_answer_survives_extraction():
    r = check_schema("<response><answer>one<br/>two</answer><idk>false</idk></response>")
    assert r.passed and style_flags(r.answer).poor_formatting


def test_runs_from_raw_keeps_raw_text_on_failure():
    runs, results = runs_from_raw([
        {"example_id": "a", "model": "m", "prompt_id": "p", "raw_output": GOOD, "response_time_s": 1},
        {"example_id": "b", "model": "m", "prompt_id": "p", "raw_output": "<response>oops", "response_time_s": 2},
    ])
    assert [r.answer_text for r in runs] == ["Paris.", "<response>oops"]
    assert [res.passed for res in results] == [True, False]
    assert runs[1].is_idk is False


def test_word_count():
    assert word_count("  one two\nthree ") == 3


def test_summary_counts_and_lower_median():
    exs = [TestExample(f"e{i}", "t", "q", ("c",), "g") for i in range(4)]
    answers = ["According to it, yes.", "Fine.", "I don't know.", "ok<br/>"]
    times = [4.0, 1.0, 3.0, 2.0]
    runs = [RunRecord(f"e{i}", "M", "p", a, i == 2, t) for i, (a, t) in enumerate(zip(answers, times))]
    s = summarize_style(runs, "M", "t", exs)
    assert (s.n, s.n_bad_style, s.n_according_to, s.n_poor_formatting, s.n_idk) == (4, 2, 1, 1, 1)
    assert s.median_response_time == lower_median(times) == 2.0
    assert s.pct_bad_style == 50.0
    assert s.conformance_rate is None
    with pytest.raises(EmptyDataError):
        summarize_style(runs, "other", "t", exs)


def test_rules_file(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"according_to": ["per the"]}))
    rules = load_rules(path)
    assert style_flags("Per the text", rules).according_to
    assert not style_flags("according to", rules).according_to
    path.write_text(json.dumps({"shouting": ["!!"]}))
    with pytest.raises(ValidationError):
        load_rules(path)


def test_demo_runs_reproduce_published_observations():
    corpus = Corpus.load(demo("examples.jsonl"), demo("runs.jsonl"))
    published = {}
    for line in case_study("observations.jsonl").read_text().splitlines():
        obs = json.loads(line)
        published[(obs["model"], obs["test_set"])] = obs
    checked = 0
    for (model, ts), obs in published.items():
        if obs.get("pct_bad_style") is None:
            continue
        s = summarize_style(corpus.runs, model, ts, corpus.examples)
        assert s.pct_bad_style == pytest.approx(obs["pct_bad_style"], abs=0.06), (model, ts)
        if obs.get("median_response_time") is not None:
            assert s.median_response_time == pytest.approx(obs["median_response_time"]), (model, ts)
        checked += 1
    assert checked >= 10
