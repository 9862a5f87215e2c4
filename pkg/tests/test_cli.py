import json
import subprocess
import sys

import pytest

from singlab.cli import dispatch, scaled_fraction


def test_exact_prints_scaled_fraction(tmp_path, capsys):
    assert dispatch(["exact", "--dist", "ber:1/2", "--n", "3", "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "338/512"
    m = json.loads((tmp_path / "manifest-exact.json").read_text())
    assert m["command"] == "exact" and m["config"]["n"] == 3 and m["seed"] == 0
    assert (tmp_path / "exact.json").exists()


def test_scaled_fraction():
    from fractions import Fraction as F

    assert scaled_fraction(F(169, 256), 512) == "338/512"
    assert scaled_fraction(F(1, 3), 512) == "1/3"


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2, "seed": 11}))
    assert dispatch(["exact", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "10/16"
    assert dispatch(["exact", "--config", str(cfg), "--n", "1", "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "1/2"
    m = json.loads((tmp_path / "manifest-exact.json").read_text())
    assert m["config"]["seed"] == 11 and m["config"]["n"] == 1
    # a manifest replays its own config
    assert dispatch(["exact", "--config", str(tmp_path / "manifest-exact.json"), "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "1/2"


def test_validation_exit_codes(tmp_path, capsys):
    assert dispatch(["exact", "--n", "0", "--out-dir", str(tmp_path)]) == 2
    assert dispatch(["exact", "--dist", "nonsense", "--out-dir", str(tmp_path)]) == 2
    assert dispatch(["frobnicate"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert dispatch(["exact", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert dispatch(["levy", "--out-dir", str(tmp_path)]) == 2


def test_budget_exit_code(tmp_path):
    assert dispatch(["exact", "--n", "5", "--budget", "1000", "--out-dir", str(tmp_path)]) == 3


def test_levy_from_csv(tmp_path, capsys):
    x = tmp_path / "x.csv"
    x.write_text("1\n1\n")
    assert dispatch(["levy", "--dist", "ber:1/2", "--x", str(x), "--r", "0", "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "1/2"
    assert dispatch(["threshold", "--x", "[1, 0, 0]", "--L", "4", "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "1/8"


def test_csv_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["tail", "--n", "6", "--samples", "3000", "--seed", "5", "--t-grid", "0,0.5,1"]
    assert dispatch(args + ["--out-dir", str(a)]) == 0
    assert dispatch(args + ["--workers", "2", "--out-dir", str(b)]) == 0
    assert (a / "tail.csv").read_bytes() == (b / "tail.csv").read_bytes()
    assert b"\r" not in (a / "tail.csv").read_bytes()


def test_sweep_and_report(tmp_path):
    assert dispatch(["sweep", "--dist", "ber:3/10", "--n", "4", "--samples", "12", "--out-dir", str(tmp_path)]) == 0
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "index,kind,accepted,margin"
    assert dispatch(["report", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert any(r["command"] == "sweep" for r in rep["runs"])


@pytest.mark.parametrize("cmd", ["mc", "compressible"])
def test_sampling_commands_run(tmp_path, cmd):
    assert dispatch([cmd, "--n", "5", "--samples", "2000", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / f"manifest-{cmd}.json").exists()


def test_console_script_entry(tmp_path):
    r = subprocess.run(
        [sys.executable, "-c", "import sys; from singlab.cli import main; sys.argv=['lab','exact','--n','1','--out-dir',sys.argv[1]]; main()", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0 and r.stdout.strip() == "1/2"
