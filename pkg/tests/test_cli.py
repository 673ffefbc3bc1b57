import json
import subprocess
import sys

import pytest

from migration_gate.cli import main
from migration_gate.fixtures import case_study, demo
from migration_gate.stub_server import StubServer, load_script

from demo_pipeline import STAGES, run_demo


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    return run_demo(tmp_path_factory.mktemp("demo"))


def test_demo_pipeline_outcome(demo_run):
    gate = json.loads(demo_run["gate.json"].read_text())
    assert sorted(gate["survivors"]) == ["Claude 4.5 Haiku", "Nova 2 Lite", "Nova Pro", "Qwen3-235B", "Qwen3-32B"]
    assert json.loads(demo_run["selection.json"].read_text())["chosen"] == ["Nova 2 Lite", "Qwen3-32B"]


def test_calibrate_from_labels_equals_from_matrices(tmp_path, demo_run):
    out = tmp_path / "c.json"
    assert main(["calibrate", "--matrices", str(case_study("matrices.json")), "--metric", "new_correctness",
                 "--out", str(out), "--summary", str(tmp_path / "s.md")]) == 0
    assert out.read_bytes() == demo_run["calibration.json"].read_bytes()


def test_rerun_is_byte_identical(tmp_path, demo_run):
    again = run_demo(tmp_path)
    for name in STAGES:
        assert again[name].read_bytes() == demo_run[name].read_bytes(), name


def test_exit_code_1_on_bad_input(tmp_path, capsys):
    bad = tmp_path / "labels.jsonl"
    bad.write_text('{"example_id": "x"}\n')
    code = main(["calibrate", "--labels", str(bad), "--verdicts", str(demo("verdicts.jsonl")),
                 "--examples", str(demo("examples.jsonl"))])
    assert code == 1
    assert "labels.jsonl:1" in capsys.readouterr().err


def test_exit_code_1_on_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["compare", "--nonsense"])
    assert info.value.code == 1


def test_exit_code_2_on_missing_file(tmp_path):
    assert main(["calibrate", "--matrices", str(tmp_path / "absent.json")]) == 2


def test_exit_code_2_on_corrupt_calibration(tmp_path):
    cal = tmp_path / "c.json"
    cal.write_text("{}")
    code = main(["compare", "--verdicts", str(demo("verdicts.jsonl")), "--calibration", str(cal),
                 "--examples", str(demo("examples.jsonl")), "--baseline", "A", "--candidate", "B"])
    assert code == 2


def test_infeasible_selection_exits_1(tmp_path):
    req = tmp_path / "req.json"
    req.write_text(json.dumps({"regions": ["MARS1"], "modalities": ["text"]}))
    assert main(["select", "--profiles", str(case_study("profiles.json")), "--requirements", str(req)]) == 1


def test_select_with_exclusions(tmp_path):
    out = tmp_path / "sel.json"
    assert main(["select", "--profiles", str(case_study("profiles.json")),
                 "--requirements", str(case_study("requirements.json")),
                 "--exclude", "Qwen3-32B", "--out", str(out)]) == 0
    assert "Qwen3-32B" not in json.loads(out.read_text())["chosen"]


def test_judge_against_scripted_server(tmp_path):
    runs = tmp_path / "runs.jsonl"
    lines = [l for l in demo("runs.jsonl").read_text().splitlines() if '"model": "Nova Pro"' in l][:12]
    runs.write_text("\n".join(lines) + "\n")
    outs = []
    with StubServer(load_script(demo("judge_script.json"))) as srv:
        for k in range(2):
            out = tmp_path / f"v{k}.jsonl"
            code = main(["judge", "--examples", str(demo("examples.jsonl")), "--runs", str(runs),
                         "--template", "new_correctness", "--endpoint", srv.url, "--out", str(out),
                         "--backoff-base", "0", "--max-parallel", str(1 + 3 * k)])
            assert code == 0
            outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(outs[0].splitlines()) == 12


def test_judge_unreachable_endpoint_exits_2(tmp_path):
    runs = tmp_path / "runs.jsonl"
    runs.write_text(demo("runs.jsonl").read_text().splitlines()[0] + "\n")
    code = main(["judge", "--examples", str(demo("examples.jsonl")), "--runs", str(runs),
                 "--template", "new_correctness", "--endpoint", "http://127.0.0.1:9/v1/chat/completions",
                 "--out", str(tmp_path / "v.jsonl"), "--max-retries", "0", "--timeout", "2"])
    assert code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "migration_gate", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("calibrate", "judge", "compare", "style", "gate", "select", "report"):
        assert cmd in proc.stdout
