"""Regenerate the bundled fixtures under src/migration_gate/data/.

case_study/  published summary numbers (confusion matrices, comparison rows,
             IDK/latency/style rates, model profiles) plus illustrative
             conformance rates.
demo/        a synthetic record-level corpus: 294 examples, 13 models. Its
             labelled subset reproduces the case-study confusion matrices
             exactly; verdict counts are tuned so that the full pipeline ends
             in the same eliminations and selection.

Run from the repository root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from migration_gate.dataset import LabelRecord, TestExample, VerdictRecord, dump_records  # noqa: E402
from migration_gate.quality import runs_from_raw  # noqa: E402

DATA = ROOT / "src" / "migration_gate" / "data"
SEED = 7

BASELINE = "Claude 3 Haiku"
MODELS = [
    "Claude 3 Haiku", "Claude 3.5 Sonnet", "Claude 4.5 Haiku", "Nova Micro", "Nova Lite", "Nova 2 Lite",
    "Nova Pro", "Gemma 3 27B", "Qwen3-32B (r)", "Qwen3-32B", "Qwen3-235B",
]
NON_CONFORMING = {"GPT-OSS 20B": 0.40, "GPT-OSS 120B": 0.62}  # conforming share
SIZES = {"hotpot": 200, "basic": 94}

# (tp, fp, fn, tn) per (test_set, metric)
MATRICES = {
    ("basic", "ragas_correctness"): (31, 10, 9, 4),
    ("basic", "llm_correctness"): (35, 8, 5, 8),
    ("basic", "new_correctness"): (37, 5, 3, 9),
    ("basic", "faithfulness"): (36, 11, 4, 3),
    ("basic", "relevance"): (33, 12, 7, 2),
    ("hotpot", "ragas_correctness"): (44, 1, 14, 7),
    ("hotpot", "llm_correctness"): (50, 2, 8, 6),
    ("hotpot", "new_correctness"): (52, 0, 6, 8),
    ("hotpot", "faithfulness"): (47, 8, 11, 0),
    ("hotpot", "relevance"): (39, 3, 19, 5),
}

# IDK %, Diff, CI low, CI high  (new_correctness against the baseline)
TABLE_COMPARISONS = {
    "basic": {
        "Claude 3 Haiku": (11.7, None, None, None),
        "Claude 3.5 Sonnet": (3.19, 9.89, 4.59, 15.8),
        "Claude 4.5 Haiku": (4.26, 12.8, 6.46, 19.9),
        "Nova Micro": (11.7, -9.33, -15.9, -3.57),
        "Nova Lite": (4.26, 0.74, -4.75, 6.36),
        "Nova 2 Lite": (2.13, 4.85, 0.173, 10.1),
        "Nova Pro": (5.32, 5.64, 0.688, 11.2),
        "Gemma 3 27B": (5.32, 0.643, -4.75, 5.97),
        "Qwen3-32B (r)": (4.26, 5.62, 0.23, 11.62),
        "Qwen3-32B": (3.19, 9.79, 4.16, 16.17),
        "Qwen3-235B": (1.06, 9.1, 4.16, 14.7),
    },
    "hotpot": {
        "Claude 3 Haiku": (5.5, None, None, None),
        "Claude 3.5 Sonnet": (7.5, 7.19, 2.96, 11.7),
        "Claude 4.5 Haiku": (8.0, 8.15, 3.91, 12.7),
        "Nova Micro": (4.0, -1.28, -5.6, 2.97),
        "Nova Lite": (10.5, 2.38, -1.88, 6.78),
        "Nova 2 Lite": (4.0, 4.75, 0.692, 9.04),
        "Nova Pro": (4.0, 6.83, 2.46, 11.4),
        "Gemma 3 27B": (2.5, 3.38, -0.68, 7.61),
        "Qwen3-32B (r)": (2.0, 5.54, 1.97, 9.25),
        "Qwen3-32B": (3.5, 6.39, 2.66, 10.29),
        "Qwen3-235B": (4.5, 5.59, 1.73, 9.73),
    },
}

# response time, median words, % bad, % poor formatting, % according to, % knowledge, % sources
TABLE_STYLE = {
    "hotpot": {
        "Claude 3 Haiku": (1.185, 108.5, 3.0, 0.0, 2.5, 1.0, 0.0),
        "Claude 3.5 Sonnet": (1.733, 107.5, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Claude 4.5 Haiku": (1.042, 106.0, 0.5, 0.0, 0.0, 0.5, 0.0),
        "Nova Pro": (0.493, 18.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Nova 2 Lite": (0.591, 49.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Qwen3-32B": (0.638, 89.5, 1.0, 0.0, 0.5, 0.5, 0.0),
        "Qwen3-32B (r)": (0.649, 98.5, 0.5, 0.0, 0.5, 0.0, 0.0),
        "Qwen3-235B": (1.031, 94.0, 0.5, 0.0, 0.5, 0.0, 0.0),
    },
    "basic": {
        "Claude 3 Haiku": (1.058, 115.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Claude 3.5 Sonnet": (1.889, 153.5, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Claude 4.5 Haiku": (1.102, 159.5, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Nova 2 Lite": (0.588, 106.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Nova Pro": (0.472, 81.5, 0.0, 0.0, 0.0, 0.0, 0.0),
        "Qwen3-32B": (0.618, 130.5, 2.1, 2.1, 0.0, 0.0, 0.0),
        "Qwen3-32B (r)": (0.674, 150.0, 7.5, 7.5, 0.0, 0.0, 0.0),
        "Qwen3-235B": (1.114, 121.5, 0.0, 0.0, 0.0, 0.0, 0.0),
    },
}
# latencies for models that are not in the style table (illustrative except Nova Lite)
EXTRA_LATENCY = {
    "hotpot": {"Nova Lite": 0.38, "Nova Micro": 0.35, "Gemma 3 27B": 0.91, "GPT-OSS 20B": 0.72, "GPT-OSS 120B": 0.95},
    "basic": {"Nova Lite": 0.41, "Nova Micro": 0.37, "Gemma 3 27B": 0.88, "GPT-OSS 20B": 0.70, "GPT-OSS 120B": 0.97},
}

R4 = ["EMEA1", "APAC1", "AMER2", "APAC2"]
PROFILES = [
    # name, tier, regions, file processing, reasoning variant
    ("Claude 3 Haiku", "Middle", R4, True, False),
    ("Claude 3.5 Sonnet", "High", ["EMEA1", "APAC1"], True, False),
    ("Claude 4.5 Haiku", "High", ["APAC1"], True, False),
    ("Nova Micro", "Low", ["EMEA1", "APAC1"], False, False),
    ("Nova Lite", "Low", ["EMEA1", "APAC1"], True, False),
    ("Nova 2 Lite", "Middle", ["EMEA1"], True, False),
    ("Nova Pro", "High", ["EMEA1", "APAC1"], True, False),
    ("Gemma 3 27B", "Low", R4, False, False),
    ("Qwen3-32B (r)", "Low", R4, False, True),
    ("Qwen3-32B", "Low", R4, False, False),
    ("Qwen3-235B", "Middle", ["EMEA1"], False, False),
    ("GPT-OSS 20B", "Low", R4, False, False),
    ("GPT-OSS 120B", "Low", R4, False, False),
]
CONFORMANCE = {m: 100.0 for m in MODELS if m != BASELINE}
CONFORMANCE.update({m: 100.0 * share for m, share in NON_CONFORMING.items()})


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_jsonl(path: Path, objs) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(o, sort_keys=True) + "\n" for o in objs), encoding="utf-8")


# --- case study ------------------------------------------------------------------


def case_study() -> None:
    out = DATA / "case_study"
    write_json(out / "matrices.json", {"matrices": [
        {"test_set": ts, "metric": m, "tp": tp, "fp": fp, "fn": fn, "tn": tn}
        for (ts, m), (tp, fp, fn, tn) in sorted(MATRICES.items())
    ]})
    rows, obs = [], []
    for ts, table in TABLE_COMPARISONS.items():
        for model, (idk, diff, lo, hi) in table.items():
            if diff is not None:
                rows.append({
                    "baseline": BASELINE, "candidate": model, "metric": "new_correctness", "test_set": ts,
                    "delta_mean_pp": diff, "ci_low_pp": lo, "ci_high_pp": hi, "p_improvement": None,
                    "n_examples": SIZES[ts], "n_samples": None, "seed": None, "level": 0.9,
                })
            style = TABLE_STYLE[ts].get(model)
            obs.append({
                "model": model, "test_set": ts, "pct_idk": idk,
                # only published latencies here; the others stay missing
                "median_response_time": style[0] if style else (EXTRA_LATENCY[ts][model] if model == "Nova Lite" else None),
                "pct_bad_style": style[2] if style else None,
            })
    write_jsonl(out / "comparisons.jsonl", rows)
    write_jsonl(out / "observations.jsonl", obs)
    write_json(out / "profiles.json", {"profiles": [
        {"name": n, "price_tier": t, "regions": sorted(r), "modalities": ["text", "file_processing"] if f else ["text"],
         "vetted": True, "reasoning_variant": rv}
        for n, t, r, f, rv in PROFILES
    ]})
    write_json(out / "requirements.json", {"regions": R4, "modalities": ["text"], "anywhere": ["file_processing"]})
    write_json(out / "conformance.json", CONFORMANCE)
    write_json(out / "policy.json", {
        "ci_lower_min": 0.0, "idk_ratio_max": 2.0, "idk_abs_increase_max": 10.0,
        "latency_ratio_max": 1.4, "conformance_min_rate": 95.0, "style_bad_max": 5.0,
    })


# --- demo corpus -------------------------------------------------------------------

FILLER = (
    "This follows from the passage provided.",
    "No further steps are required.",
    "The details above cover the request.",
    "Other options exist but are not needed here.",
)


def make_examples(rng) -> list[TestExample]:
    out = []
    for ts, n in SIZES.items():
        prefix = "hp" if ts == "hotpot" else "ba"
        for i in range(n):
            val = int(rng.integers(100, 9999))
            out.append(TestExample(
                id=f"{prefix}-{i:03d}",
                test_set=ts,
                question=f"What is the reference value recorded for item {i} in the {ts} catalogue?",
                contexts=(f"Item {i} in the {ts} catalogue has reference value {val}.",
                          f"Items are reviewed once a year; item {i} was last reviewed in spring."),
                ground_truth=f"The reference value of item {i} is {val}. It was last reviewed in spring.",
            ))
    return out


def _times(rng, n: int, median: float) -> list[float]:
    below = (n - 1) // 2
    lo = np.round(median - rng.uniform(0.005, 0.4 * median, below), 3)
    hi = np.round(median + rng.uniform(0.005, 0.6 * median, n - 1 - below), 3)
    vals = np.concatenate([lo, [median], hi])
    rng.shuffle(vals)
    return [float(v) for v in vals]


def _pass_count(ts: str, model: str, base_pass: int) -> int:
    diff = TABLE_COMPARISONS[ts][model][1]
    if diff is None:
        return base_pass
    slope = {"hotpot": 0.783, "basic": 0.575}[ts]  # E[p_pass - p_fail] at the posterior means
    return base_pass + int(round(diff / 100 * SIZES[ts] / slope))


def make_corpus(rng, examples):
    by_set = {ts: [e for e in examples if e.test_set == ts] for ts in SIZES}
    base_pass = {"hotpot": 140, "basic": 58}
    churn = {"hotpot": 4, "basic": 3}
    raw, verdicts, idk_sets, passes = [], [], {}, {}
    models = MODELS + list(NON_CONFORMING)
    for ts, exs in by_set.items():
        n = len(exs)
        ids = [e.id for e in exs]
        base = set(rng.choice(ids, base_pass[ts], replace=False).tolist())
        for model in models:
            if model == BASELINE:
                passed = set(base)
            elif model in NON_CONFORMING:
                passed = set(rng.choice(ids, base_pass[ts], replace=False).tolist())
            else:
                k = _pass_count(ts, model, base_pass[ts])
                n_drop = churn[ts] + max(0, base_pass[ts] - k)
                drop = set(rng.choice(sorted(base), n_drop, replace=False).tolist())
                kept = base - drop
                pool = sorted(set(ids) - base)
                add = set(rng.choice(pool, k - len(kept), replace=False).tolist())
                passed = kept | add
            passes[(model, ts)] = passed
            fails = sorted(set(ids) - passed)
            n_idk = int(round(TABLE_COMPARISONS[ts].get(model, (5.0,))[0] / 100 * n))
            idk = set(rng.choice(fails, n_idk, replace=False).tolist())
            idk_sets[(model, ts)] = idk

            style = TABLE_STYLE[ts].get(model)
            median_t = style[0] if style else EXTRA_LATENCY[ts][model]
            times = _times(rng, n, median_t)
            flags = _style_plan(rng, ts, model, [i for i in ids if i not in idk])
            conform_share = NON_CONFORMING.get(model, 1.0)
            broken = set(rng.choice(ids, int(round((1 - conform_share) * n)), replace=False).tolist())
            for ex, t in zip(exs, times):
                raw.append({
                    "example_id": ex.id, "model": model, "prompt_id": "v1", "response_time_s": t,
                    "raw_output": _reply(rng, ex, ex.id in idk, flags.get(ex.id, ()), ex.id in broken),
                })
            if model not in NON_CONFORMING:
                verdicts += [VerdictRecord(i, model, "new_correctness", "pass" if i in passed else "fail") for i in ids]
    runs, _ = runs_from_raw(raw)
    return runs, verdicts, idk_sets, passes


def _style_plan(rng, ts, model, candidates):
    style = TABLE_STYLE[ts].get(model)
    if style is None:
        return {}
    n = SIZES[ts]
    counts = {k: int(round(p / 100 * n)) for k, p in zip(("poor", "according", "knowledge", "sources"), style[3:])}
    bad = int(round(style[2] / 100 * n))
    plan: dict[str, list] = {}
    order = list(rng.permutation(sorted(candidates)))
    # flags are stacked onto the first ``bad`` answers so that overlaps match the bad-style total
    cursor = 0
    for flag, k in counts.items():
        for _ in range(k):
            plan.setdefault(order[cursor % bad], []).append(flag)
            cursor += 1
    return plan


def _reply(rng, ex: TestExample, idk: bool, flags, broken: bool) -> str:
    if idk:
        answer, flag = "I don't know.", "true"
    else:
        value = ex.ground_truth.split(" is ")[1].split(".")[0]
        lead = {
            "according": "according to the catalogue",
            "knowledge": "based on the knowledge provided",
            "sources": "using the sources given",
        }
        phrases = [lead[f] for f in flags if f in lead]
        opener = (", ".join(phrases) + ", the").capitalize() if phrases else "The"
        body = f"{opener} reference value is {value}. " + " ".join(
            FILLER[j] for j in rng.choice(len(FILLER), int(rng.integers(1, 4)), replace=False)
        )
        if "poor" in flags:
            body += "<br/>"
        answer, flag = body.strip(), "false"
    if broken:
        variants = (
            f"<response><answer>{answer}</answer></response>",
            f"```xml\n<response><answer>{answer}</answer><idk>{flag}</idk>\n```",
            f"<response><answer>{answer}</answer><idk>{'yes' if flag == 'true' else 'no'}</idk></response>",
            f"<reply><answer>{answer}</answer><idk>{flag}</idk></reply>",
        )
        return variants[int(rng.integers(len(variants)))]
    return f"<response><answer>{answer}</answer><idk>{flag}</idk><citation>1</citation></response>"


def make_calibration(rng, examples, verdicts, idk_sets, passes):
    """Labelled (example, model) pairs and the extra metric verdicts that yield the matrices."""
    labels, extra = [], []
    by_set = {ts: [e.id for e in examples if e.test_set == ts] for ts in SIZES}
    for ts in SIZES:
        tp, fp, fn, tn = MATRICES[(ts, "new_correctness")]
        pass_pairs = [(i, m) for m in MODELS for i in by_set[ts] if i in passes[(m, ts)]]
        fail_pairs = [(i, m) for m in MODELS for i in by_set[ts] if i not in passes[(m, ts)]]
        fail_plain = [p for p in fail_pairs if p[0] not in idk_sets[(p[1], ts)]]
        fail_idk = [p for p in fail_pairs if p[0] in idk_sets[(p[1], ts)]]
        pick = lambda pool, k: [pool[j] for j in rng.choice(len(pool), k, replace=False)]  # noqa: E731
        tp_pairs = pick(pass_pairs, tp + fp)
        fn_pairs = pick(fail_plain, fn)
        rest = [p for p in fail_plain if p not in fn_pairs]
        tn_pairs = pick(fail_idk, 2) + pick(rest, tn - 2)
        correct = tp_pairs[:tp] + fn_pairs
        incorrect = tp_pairs[tp:] + tn_pairs
        for i, m in correct:
            labels.append(LabelRecord(i, m, "correct"))
        for i, m in incorrect:
            raw = "idk" if i in idk_sets[(m, ts)] else str(rng.choice(["incorrect", "incomplete", "irrelevant"]))
            labels.append(LabelRecord(i, m, raw))

        extra_incorrect = []
        if ts == "basic":
            # two labelled answers from a model that never got new_correctness verdicts
            extra_incorrect = [(by_set[ts][j], "GPT-OSS 20B") for j in rng.choice(len(by_set[ts]), 2, replace=False)]
            for i, m in extra_incorrect:
                labels.append(LabelRecord(i, m, "incorrect"))
        for metric in ("ragas_correctness", "llm_correctness", "faithfulness", "relevance"):
            mtp, mfp, mfn, mtn = MATRICES[(ts, metric)]
            inc = incorrect + (extra_incorrect if metric == "llm_correctness" else [])
            if mtp + mfn != len(correct) or mfp + mtn != len(inc):
                raise SystemExit(f"matrix for {metric}/{ts} does not fit the labelled pairs")
            c_pass = set(rng.choice(len(correct), mtp, replace=False).tolist())
            i_pass = set(rng.choice(len(inc), mfp, replace=False).tolist())
            extra += [VerdictRecord(i, m, metric, "pass" if j in c_pass else "fail") for j, (i, m) in enumerate(correct)]
            extra += [VerdictRecord(i, m, metric, "pass" if j in i_pass else "fail") for j, (i, m) in enumerate(inc)]
    return labels, extra


def demo() -> None:
    rng = np.random.default_rng(SEED)
    out = DATA / "demo"
    examples = make_examples(rng)
    runs, verdicts, idk_sets, passes = make_corpus(rng, examples)
    labels, extra = make_calibration(rng, examples, verdicts, idk_sets, passes)
    key = lambda r: r.key  # noqa: E731
    dump_records(sorted(examples, key=key), out / "examples.jsonl")
    dump_records(sorted(runs, key=key), out / "runs.jsonl")
    dump_records(sorted(verdicts + extra, key=key), out / "verdicts.jsonl")
    dump_records(sorted(labels, key=key), out / "labels.jsonl")
    write_json(out / "judge_script.json", {"script": [
        {"status": 429, "body": "slow down"},
        {"status": 200, "body": "The answer matches the context.\n<assessment>correct</assessment>",
         "match": "reference value is", "repeat": True},
        {"status": 200, "body": "The model declined to answer.\n<assessment>incorrect</assessment>", "repeat": True},
    ]})


if __name__ == "__main__":
    (DATA / "demo").mkdir(parents=True, exist_ok=True)
    case_study()
    demo()
    print(f"fixtures written under {DATA}")
