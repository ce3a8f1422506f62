import csv
import hashlib
import json
import subprocess
import sys

import pytest

from softgov import cli
from softgov.scenario import PRESET_NAMES


@pytest.fixture
def baseline_out(tmp_path, capsys):
    out = tmp_path / "base"
    assert cli.main(["run", "baseline", "--seed", "42", "--out", str(out)]) == 0
    capsys.readouterr()
    return out


def test_run_writes_outputs(baseline_out):
    assert {p.name for p in baseline_out.iterdir()} == {"events.jsonl", "summary.json", "epochs.csv"}
    summary = json.loads((baseline_out / "summary.json").read_text())
    assert summary["pass"] is True and summary["seed"] == 42 and summary["total_interactions"] > 0
    with open(baseline_out / "epochs.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20 and float(rows[-1]["cumulative_welfare"]) == pytest.approx(summary["total_welfare"])
    assert rows[0]["quality_gap"] == ""


def test_run_prints_summary_row(tmp_path, capsys):
    assert cli.main(["run", "threshold_dancer", "--seed", "7", "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("threshold_dancer  seed=7  toxicity=") and "interactions=" in out
    assert cli.main(["run", "baseline", "--out", str(tmp_path / "j"), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["scenario_name"] == "baseline"


def test_unknown_scenario_exits_2(tmp_path, capsys):
    assert cli.main(["run", "no_such", "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    for name in PRESET_NAMES:
        assert name in err
    assert not (tmp_path / "x").exists()


def test_config_error_exits_2_with_path(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("governance:\n  tax_rate: -0.1\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "governance.tax_rate" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "x")]) == 2


def test_overrides_are_echoed_into_header(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["run", "baseline", "--seed", "9", "--epochs", "3", "--steps", "4", "--out", str(out)]) == 0
    header = json.loads((out / "events.jsonl").read_text().split("\n")[0])
    assert header["seed"] == 9
    assert (header["config"]["epochs"], header["config"]["steps_per_epoch"]) == (3, 4)
    assert cli.main(["replay", str(out / "events.jsonl"), "--verify"]) == 0


def test_identical_logs_across_directories(tmp_path, capsys):
    for d in ("a", "b"):
        assert cli.main(["run", "collusion_detection", "--seed", "1024", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "events.jsonl").read_bytes() == (tmp_path / "b" / "events.jsonl").read_bytes()


def test_failed_run_leaves_nothing(tmp_path, monkeypatch, capsys):
    def boom(config):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "run", boom)
    out = tmp_path / "fresh"
    with pytest.raises(RuntimeError):
        cli.main(["run", "baseline", "--out", str(out)])
    assert not out.exists()


def test_failed_write_removes_partial_files(tmp_path, monkeypatch, capsys):
    out = tmp_path / "existing"
    out.mkdir()
    (out / "keep.txt").write_text("mine")
    monkeypatch.setattr(cli, "epochs_csv", lambda s: (_ for _ in ()).throw(OSError("full")))
    with pytest.raises(OSError):
        cli.main(["run", "baseline", "--out", str(out)])
    assert sorted(p.name for p in out.iterdir()) == ["keep.txt"]


def test_replay_verify_and_metrics_only(baseline_out, capsys):
    log = baseline_out / "events.jsonl"
    digest = hashlib.sha256(log.read_bytes()).hexdigest()
    assert cli.main(["replay", str(log), "--verify"]) == 0
    assert "verified" in capsys.readouterr().out
    assert cli.main(["replay", str(log), "--metrics-only"]) == 0
    out = capsys.readouterr().out
    for key in ("toxicity=", "quality_gap=", "conditional_loss=", "spread="):
        assert key in out
    assert "welfare" not in out
    assert hashlib.sha256(log.read_bytes()).hexdigest() == digest


def test_replay_verify_catches_summary_mismatch(baseline_out, capsys):
    path = baseline_out / "summary.json"
    data = json.loads(path.read_text())
    data["total_welfare"] += 1e-6
    path.write_text(json.dumps(data))
    assert cli.main(["replay", str(baseline_out / "events.jsonl"), "--verify"]) == 1
    assert "total_welfare" in capsys.readouterr().err


def test_replay_verify_needs_summary(tmp_path, baseline_out, capsys):
    lone = tmp_path / "lone.jsonl"
    lone.write_bytes((baseline_out / "events.jsonl").read_bytes())
    (tmp_path / "summary.json").unlink(missing_ok=True)
    assert cli.main(["replay", str(lone), "--verify"]) == 1


def test_corrupted_float_names_line(baseline_out, capsys):
    lines = (baseline_out / "events.jsonl").read_text().split("\n")
    index = next(i for i, l in enumerate(lines) if '"kind":"payoff"' in l)
    lines[index] = lines[index].replace('"proxy_score":', '"proxy_score":0.1x', 1)
    bad = baseline_out / "bad.jsonl"
    bad.write_text("\n".join(lines))
    assert cli.main(["replay", str(bad)]) == 1
    err = capsys.readouterr().err
    assert f"line {index + 1}" in err and "proxy_score" in err


def test_truncated_log_warns(baseline_out, capsys):
    text = (baseline_out / "events.jsonl").read_text()
    cut = baseline_out / "cut.jsonl"
    cut.write_text(text[: len(text) // 2])
    assert cli.main(["replay", str(cut)]) == 0
    assert "truncated" in capsys.readouterr().err


@pytest.mark.parametrize("name,rows", [("rho", [0.0, 0.1, 0.3, 0.5, 0.7, 1.0]),
                                       ("decay", [0.70, 0.80, 0.90, 0.95, 1.0]),
                                       ("audit", [0.0, 0.05, 0.10, 0.25, 0.50])])
def test_builtin_sweeps(tmp_path, capsys, name, rows):
    out = tmp_path / name
    assert cli.main(["sweep", name, "--seeds", "42", "--out", str(out)]) == 0
    with open(out / "sweep.csv", newline="") as fh:
        got = [float(r["grid_value"]) for r in csv.DictReader(fh)]
    assert got == rows
    assert len(json.loads((out / "sweep.json").read_text())["rows"]) == len(rows)
    assert capsys.readouterr().out.startswith("grid_value,")


def test_sweep_weights_and_json(tmp_path, capsys):
    out = tmp_path / "w"
    assert cli.main(["sweep", "weights", "--seeds", "42", "--out", str(out), "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in data] == ["uniform", "default", "heavy_task"]
    assert (out / "sweep.csv").exists()


def test_sweep_file_and_jobs(tmp_path, capsys):
    spec = tmp_path / "s.yaml"
    spec.write_text("base: baseline\nparameter: governance.tax_rate\ngrid: [0.0, 0.2]\nseeds: [1, 2]\n")
    assert cli.main(["sweep", str(spec), "--jobs", "2", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["sweep", str(spec), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.json").read_text() == (tmp_path / "b" / "sweep.json").read_text()


def test_sweep_errors(tmp_path, capsys):
    assert cli.main(["sweep", "nonsense", "--out", str(tmp_path)]) == 2
    assert "rho" in capsys.readouterr().err
    spec = tmp_path / "s.yaml"
    spec.write_text("base: baseline\nparameter: governance.nope\ngrid: [1]\n")
    assert cli.main(["sweep", str(spec), "--out", str(tmp_path / "o")]) == 2


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "Strict Governance" in out and "4H+2O+2A+1D+1C" in out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "softgov", "presets"], capture_output=True, text=True)
    assert r.returncode == 0 and "Baseline" in r.stdout
    r = subprocess.run([sys.executable, "-m", "softgov", "run"], capture_output=True, text=True)
    assert r.returncode == 2
