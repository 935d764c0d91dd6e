import json

import numpy as np
import pytest

from mnlab.cli import main, parse_device, parse_state
from mnlab.mitigate import CalibrationMatrix, calibrate
from mnlab.noisemodel import ProbVector, ry_measurement
from mnlab.povm import Povm

ANGLE = np.pi / 40


def run_cli(*argv):
    return main(list(argv))


def test_parse_device_variants(tmp_path):
    assert parse_device("ideal:2").n == 2
    povm = parse_device(f"ry:1:{ANGLE}")
    assert povm.element("0")[0, 0] == pytest.approx(np.cos(ANGLE) ** 2)
    path = tmp_path / "povm.json"
    path.write_text(ry_measurement(2, ANGLE).to_json())
    assert parse_device(f"povm-file:{path}").n == 2
    cal = CalibrationMatrix(1, np.array([[0.9, 0.2], [0.1, 0.8]]))
    cpath = tmp_path / "cal.json"
    cpath.write_text(cal.to_json())
    device = parse_device(f"confusion-file:{cpath}")
    assert np.abs(device.element("0") - np.diag([0.9, 0.2])).max() < 1e-12


def test_parse_state_variants():
    assert parse_state("zero", 2).matrix[0, 0] == 1.0
    assert parse_state("basis:10", 2).matrix[2, 2] == 1.0
    assert parse_state("mixed", 1).matrix[0, 0] == 0.5
    assert parse_state("ghz", 3).matrix[0, 7] == pytest.approx(0.5)
    assert parse_state("mermin", 4).matrix[0, 0] == pytest.approx(0.5)
    assert abs(parse_state("plustheta:0.5", 1).matrix[0, 1]) == pytest.approx(0.5)


def test_detect_cli_reproduces_first_harmonic(tmp_path, capsys):
    out_json = tmp_path / "fit.json"
    out_csv = tmp_path / "data.csv"
    code = run_cli(
        "detect", "--device", "ry:3:0.0785398", "--k", "100",
        "--shots", "8192", "--seed", "7",
        "--out-json", str(out_json), "--out-csv", str(out_csv),
    )
    assert code == 0
    payload = json.loads(out_json.read_text())
    fit = {f["outcome"]: f for f in payload["fits"]}["000"]
    assert abs(fit["a"][1] - 0.472) < 0.02
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "theta,outcome,estimate"
    assert len(lines) == 1 + 100 * 8


def test_detect_cli_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["detect", "--device", "ry:1:0.3", "--k", "10", "--shots", "128",
            "--seed", "3"]
    assert run_cli(*args, "--out-json", str(a)) == 0
    assert run_cli(*args, "--out-json", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_eliminate_cli_analytic(tmp_path):
    out = tmp_path / "probs.json"
    code = run_cli(
        "eliminate", "--device", "ry:1:0.0785398", "--state", "zero",
        "--method", "pauli", "--mode", "analytic", "--out-json", str(out),
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["p"][0] == pytest.approx(np.cos(0.0785398) ** 2, abs=1e-12)


def test_mitigate_cli(tmp_path):
    probs = tmp_path / "p.json"
    probs.write_text(ProbVector(1, np.array([0.5, 0.5])).to_json())
    cal = tmp_path / "cal.json"
    cal.write_text(CalibrationMatrix(1, np.array([[0.9, 0.2], [0.1, 0.8]])).to_json())
    out = tmp_path / "out.json"
    code = run_cli(
        "mitigate", "--probs", str(probs), "--calibration", str(cal),
        "--mitigator", "inverse", "--out-json", str(out),
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["p"][0] == pytest.approx(3 / 7, abs=1e-9)
    assert payload["has_negative"] is False
    # requires exactly one calibration source
    assert run_cli("mitigate", "--probs", str(probs), "--mitigator", "lsq") == 2


def test_experiment_mermin_cli_analytic(tmp_path, capsys):
    code = run_cli(
        "experiment", "mermin", "--device", "ideal:4", "--mode", "analytic",
        "--repeats", "3",
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mean"] == pytest.approx(11.3137, abs=1e-4)


def test_experiment_ghz_cli(tmp_path):
    out_csv = tmp_path / "ghz.csv"
    code = run_cli(
        "experiment", "ghz", "--device", "ry:4:0.0785398", "--mode", "analytic",
        "--method", "iz", "--mitigator", "lsq", "--phi-points", "4",
        "--repeats", "2", "--out-csv", str(out_csv),
        "--out-json", str(tmp_path / "ghz.json"),
    )
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "phi,method,value,stderr"
    assert len(lines) == 5
    values = json.loads((tmp_path / "ghz.json").read_text())["values"]
    assert values[0] == pytest.approx(1.0, abs=1e-6)


def test_experiment_vqe_cli_smoke(tmp_path):
    out_csv = tmp_path / "vqe.csv"
    code = run_cli(
        "experiment", "vqe", "--device", "ideal:4", "--mode", "analytic",
        "--restarts", "1", "--sweeps", "3", "--out-csv", str(out_csv),
        "--out-json", str(tmp_path / "vqe.json"),
    )
    assert code == 0
    rows = out_csv.read_text().splitlines()
    assert rows[0] == "run,iteration,energy"
    assert len(rows) == 1 + 4  # initial point plus three sweeps
    payload = json.loads((tmp_path / "vqe.json").read_text())
    assert payload["final_energies"][0] < -0.5


def test_povm_tools_cli(tmp_path, capsys):
    code = run_cli("povm-tools", "describe", "--device", "ry:2:0.0785398")
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["classical_at_1e-8"] is False
    assert payload["measurement_fidelity"] == pytest.approx(
        np.cos(0.0785398) ** 4, abs=1e-12
    )

    out = tmp_path / "povm.json"
    assert run_cli("povm-tools", "export", "--device", "ideal:1",
                   "--out-json", str(out)) == 0
    povm = Povm.from_json(out.read_text())
    assert povm.element("0")[0, 0] == 1.0


def test_cli_error_codes(tmp_path, capsys):
    assert run_cli("detect", "--device", "bogus:3", "--k", "5", "--shots", "8") == 2
    # numerical failure: singular calibration with inverse mitigation
    probs = tmp_path / "p.json"
    probs.write_text(ProbVector(1, np.array([0.5, 0.5])).to_json())
    cal = tmp_path / "cal.json"
    cal.write_text(
        CalibrationMatrix(1, np.array([[1.0, 1.0], [0.0, 0.0]])).to_json()
    )
    code = run_cli("mitigate", "--probs", str(probs), "--calibration", str(cal),
                   "--mitigator", "inverse")
    assert code == 3
    capsys.readouterr()


def test_cli_seed_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MNL_SEED", "77")
    code = run_cli("eliminate", "--device", "ry:1:0.1", "--state", "zero",
                   "--method", "iz", "--mode", "sampled", "--twirls", "4",
                   "--shots", "64")
    assert code == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 77
    monkeypatch.setenv("MNL_SEED", "not-an-int")
    assert run_cli("eliminate", "--device", "ry:1:0.1", "--state", "zero",
                   "--method", "iz") == 2


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"device": "ry:1:0.3", "k": 12, "shots": 64,
                               "seed": 5}))
    code = run_cli("detect", "--config", str(cfg), "--shots", "128")
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["k"] == 12
    assert payload["shots"] == 128  # explicit flag overrides config
    assert payload["seed"] == 5

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"device": "ry:1:0.3", "bogus_field": 1}))
    assert run_cli("detect", "--config", str(bad)) == 2
