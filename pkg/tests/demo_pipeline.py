"""Drive the bundled demo corpus through every CLI stage, in process."""

from __future__ import annotations

from pathlib import Path

from migration_gate.cli import main
from migration_gate.fixtures import case_study, demo

BASELINE = "Claude 3 Haiku"
CANDIDATES = [
    "Claude 3.5 Sonnet", "Claude 4.5 Haiku", "Gemma 3 27B", "Nova 2 Lite", "Nova Lite",
    "Nova Micro", "Nova Pro", "Qwen3-235B", "Qwen3-32B", "Qwen3-32B (r)",
]
STAGES = ("calibration.json", "comparisons.jsonl", "styles.jsonl", "gate.json", "selection.json",
          "report.md", "report.csv", "report.json")


def run(*argv) -> None:
    code = main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"migration-gate {argv[0]} exited with {code}")


def run_demo(out: Path, workers: int = 1, seed: int = 20240, samples: int = 20_000) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    p = {name: out / name for name in STAGES}
    examples = demo("examples.jsonl")
    run("calibrate", "--labels", demo("labels.jsonl"), "--verdicts", demo("verdicts.jsonl"),
        "--examples", examples, "--metric", "new_correctness", "--out", p["calibration.json"],
        "--summary", out / "calibration.md")
    run("compare", "--verdicts", demo("verdicts.jsonl"), "--calibration", p["calibration.json"],
        "--examples", examples, "--baseline", BASELINE, "--candidate", *CANDIDATES,
        "--samples", samples, "--seed", seed, "--workers", workers, "--out", p["comparisons.jsonl"])
    run("style", "--runs", demo("runs.jsonl"), "--examples", examples, "--out", p["styles.jsonl"])
    run("gate", "--policy", case_study("policy.json"), "--profiles", case_study("profiles.json"),
        "--comparisons", p["comparisons.jsonl"], "--styles", p["styles.jsonl"], "--baseline", BASELINE,
        "--out", p["gate.json"])
    run("select", "--profiles", case_study("profiles.json"), "--requirements", case_study("requirements.json"),
        "--ranks", p["comparisons.jsonl"], "--gate", p["gate.json"], "--out", p["selection.json"])
    inputs = [p["calibration.json"], p["comparisons.jsonl"], p["styles.jsonl"], p["gate.json"], p["selection.json"]]
    run("report", "--inputs", *inputs, "--format", "markdown", "--out", p["report.md"])
    run("report", "--inputs", *inputs, "--format", "csv", "--out", p["report.csv"])
    run("report", "--inputs", *inputs, "--format", "structured", "--out", p["report.json"])
    return p
