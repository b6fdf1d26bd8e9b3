import json
import subprocess
import sys

import numpy as np
import pytest

from ldcusum.cli import main


def simulate_file(tmp_path, *extra, name="s.txt"):
    out = tmp_path / name
    assert main(["simulate", "-o", str(out), *extra]) == 0
    return out


def test_simulate_basic(tmp_path):
    out = simulate_file(tmp_path, "--ar", "0.5", "--length", "200", "--change-at", "100",
                        "--new-mean", "3", "--seed", "7")
    lines = out.read_text().splitlines()
    assert len(lines) == 200
    x = np.array([float(v) for v in lines])
    assert abs(x[149:].mean() - 3) < 1
    manifest = json.loads((tmp_path / "s.txt.manifest.json").read_text())
    assert manifest["parameters"]["seed"] == 7
    assert manifest["argv"][0] == "simulate"


def test_simulate_rerun_from_manifest(tmp_path):
    out = simulate_file(tmp_path, "--ma", "-0.6", "--length", "50", "--seed", "3")
    argv = json.loads((tmp_path / "s.txt.manifest.json").read_text())["argv"]
    again = tmp_path / "again.txt"
    argv = [a if not a.startswith("--output=") else f"--output={again}" for a in argv]
    assert main(argv) == 0
    assert again.read_bytes() == out.read_bytes()


def test_simulate_nonstationary(tmp_path, capsys):
    assert main(["simulate", "--ar", "1.0", "--length", "10", "-o", str(tmp_path / "x")]) == 2
    assert "unit circle" in capsys.readouterr().err


def test_simulate_length_one(tmp_path):
    out = simulate_file(tmp_path, "--length", "1")
    assert len(out.read_text().splitlines()) == 1


def test_negative_list_values(tmp_path):
    out = simulate_file(tmp_path, "--ar", "-0.5,0.2", "--length", "5")
    assert len(out.read_text().splitlines()) == 5


def test_bad_flag():
    assert main(["simulate", "--bogus"]) == 2


def test_detect_defaults(tmp_path, capsys):
    series = simulate_file(tmp_path, "--ar", "0.5", "--change-at", "100", "--new-mean", "3", "--seed", "7")
    out = tmp_path / "d.csv"
    assert main(["detect", str(series), "--ar", "0.5", "--changepoint", "100", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "window_index,margin,argmax_beta,alarm"
    assert len(lines) == 152
    summary = capsys.readouterr().out
    assert "first_detection=" in summary and "windows=151" in summary


def test_detect_window_100(tmp_path):
    series = simulate_file(tmp_path, "--ma", "-0.6", "--length", "300")
    out = tmp_path / "d.csv"
    assert main(["detect", str(series), "--ma", "-0.6", "--window", "100", "--alpha", "0.0001",
                 "--tuning-max", "0.95", "-o", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 202


def test_detect_too_short(tmp_path):
    series = simulate_file(tmp_path, "--length", "10")
    assert main(["detect", str(series), "-o", str(tmp_path / "d.csv")]) == 3


def test_detect_exclusive_kinds(tmp_path):
    series = simulate_file(tmp_path, "--length", "60")
    assert main(["detect", str(series), "--nu-bar", "1", "--tau", "2"]) == 2


@pytest.mark.parametrize("flags", [["--tau", "2"], ["--f", "0.5"], ["--variant", "finite_n"]])
def test_detect_other_kinds(tmp_path, flags):
    series = simulate_file(tmp_path, "--length", "80")
    out = tmp_path / "d.csv"
    assert main(["detect", str(series), *flags, "-o", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 32


def test_config_file_and_precedence(tmp_path):
    series = simulate_file(tmp_path, "--length", "120")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# detector\nwindow = 40\nalpha=0.05\n")
    out = tmp_path / "d.csv"
    assert main(["detect", str(series), "--config", str(cfg), "--window", "60", "-o", str(out)]) == 0
    params = json.loads((tmp_path / "d.csv.manifest.json").read_text())["parameters"]
    assert params["window"] == 60 and params["alpha"] == 0.05
    assert len(out.read_text().splitlines()) == 62


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_experiment_converge(tmp_path):
    assert main(["experiment", "converge", "--process", "ma1:-0.9", "--n-values", "50,400",
                 "--output-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "converge.csv").read_text().splitlines()
    assert rows[0] == "n,diff"
    assert abs(float(rows[2].split(",")[1])) > 1


def test_experiment_sweep_grid(tmp_path):
    assert main(["experiment", "sweep", "--coefs", "-0.9:0.9:0.1", "--runs", "3",
                 "--output-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "sweep_ar1.csv").read_text().splitlines()
    assert rows[0] == "coef,mean_false_alarm,mean_delay"
    assert len(rows) == 20


def test_experiment_basic_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["experiment", "basic", "--process", "ar1:0.5", "--runs", "20", "--seed", "4",
                     "--output-dir", str(d)]) == 0
    for name in ("basic_alarm_ratio.csv", "basic_alarm_ratio.csv.manifest.json"):
        assert (a / name).read_bytes().replace(bytes(a), b"") == (b / name).read_bytes().replace(bytes(b), b"")
    lines = (a / "basic_alarm_ratio.csv").read_text().splitlines()
    assert lines[0] == "window_index,alarm_ratio" and len(lines) == 152


def test_experiment_tuned_and_sensitivity(tmp_path):
    assert main(["experiment", "tuned", "--process", "ma1:-0.6", "--runs", "3",
                 "--output-dir", str(tmp_path)]) == 0
    params = json.loads((tmp_path / "tuned_alarm_ratio.csv.manifest.json").read_text())["parameters"]
    assert params["window"] is None  # preset value applies
    assert len((tmp_path / "tuned_alarm_ratio.csv").read_text().splitlines()) == 202
    assert main(["experiment", "sensitivity", "--process", "wn", "--runs", "3", "--tested-mean", "5",
                 "--output-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "sensitivity.csv").read_text().splitlines()
    assert len(rows) == 5


def test_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ldcusum.cli", "converge", "--process", "wn",
                           "--n-values", "5,10", "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "converge.csv").exists()
