import json
import subprocess
import sys

import pytest

from osclab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def rogue(tmp_path):
    path = tmp_path / "E.txt"
    assert main(["gen-rogue", "--n", "64", "--count", "12", "--seed", "5", "--out", str(path)]) == EXIT_OK
    return path


def test_gen_rogue_deterministic(tmp_path, rogue):
    again = tmp_path / "E2.txt"
    main(["gen-rogue", "--n", "64", "--count", "12", "--seed", "5", "--out", str(again)])
    assert rogue.read_bytes() == again.read_bytes()
    assert len(rogue.read_text().splitlines()) == 13


def test_seed_env_fallback(tmp_path, monkeypatch):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    main(["gen-rogue", "--n", "32", "--count", "10", "--seed", "9", "--out", str(a)])
    monkeypatch.setenv("OSCLAB_SEED", "9")
    main(["gen-rogue", "--n", "32", "--count", "10", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("OSCLAB_SEED", "nine")
    assert main(["gen-rogue", "--n", "32", "--count", "10", "--out", str(b)]) == EXIT_USAGE


def test_construct_reports_byte_identical(tmp_path, rogue):
    outs = [tmp_path / f"r{i}.json" for i in range(2)]
    for o in outs:
        assert main(["construct", "--rogue", str(rogue), "--no-timestamp", "--out", str(o)]) == EXIT_OK
    assert outs[0].read_bytes() == outs[1].read_bytes()
    rep = json.loads(outs[0].read_text())
    assert rep["config"]["eps"] == 0.1 and "timestamp" not in rep and rep["rogue_count"] == 12


def test_construct_verify_hash_round_trip(tmp_path, rogue):
    c, v = tmp_path / "c.json", tmp_path / "v.json"
    main(["construct", "--rogue", str(rogue), "--no-timestamp", "--out", str(c)])
    code = main(["verify", "--rogue", str(rogue), "--no-timestamp", "--out", str(v)])
    assert code in (EXIT_OK, EXIT_FAIL)
    assert json.loads(c.read_text())["pipeline_hash"] == json.loads(v.read_text())["pipeline_hash"]


def test_verify_empty_set(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("2 32\n")
    out = tmp_path / "v.json"
    assert main(["verify", "--rogue", str(path), "--no-timestamp", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert all(rep["checks"].values())


def test_budget_gate_exit_code(tmp_path, capsys):
    path = tmp_path / "big.txt"
    main(["gen-rogue", "--n", "32", "--count", "400", "--out", str(path)])
    assert main(["construct", "--rogue", str(path)]) == EXIT_USAGE
    assert "budget" in capsys.readouterr().err
    assert main(["construct", "--rogue", str(path), "--ungated", "--no-timestamp",
                 "--out", str(tmp_path / "r.json")]) == EXIT_OK


def test_usage_errors(tmp_path):
    assert main(["construct"]) == EXIT_USAGE
    assert main(["gen-rogue", "--n", "32", "--count", "x"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    bad = tmp_path / "bad.txt"
    bad.write_text("2 32\n1 2 3\n")
    assert main(["construct", "--rogue", str(bad)]) == EXIT_USAGE
    assert main(["construct", "--rogue", str(tmp_path / "missing.txt")]) == EXIT_USAGE


def test_classify_export(tmp_path):
    path, out = tmp_path / "rogue.txt", tmp_path / "c.json"
    assert main(["classify", "--n", "16", "--s", "8", "--delta", "0.9", "--export-rogue", str(path),
                 "--no-timestamp", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["summary"]["rogue"] == len(path.read_text().splitlines()) - 1


def test_experiment_curve(tmp_path):
    curve = tmp_path / "curve.csv"
    code = main(["experiment", "--n", "16", "--s", "4", "--radii", "2,4,8", "--curve", str(curve),
                 "--no-timestamp", "--out", str(tmp_path / "e.json")])
    assert code in (EXIT_OK, EXIT_FAIL)
    lines = curve.read_text().splitlines()
    assert lines[0].startswith("# R,") and len(lines) == 4


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "osclab.cli", "gen-rogue", "--n", "16", "--count", "3"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.splitlines()[0] == "2 16"
