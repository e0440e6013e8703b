#!/usr/bin/env python
"""
Tests for the homog command-line entry point: exit codes and written artefacts
"""

import csv
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cli.homog_cli import main

SCALED_IDENTITY = [1.5, 0, 0, 1.5, 0, 0, 0, 0, 0, 0, 0, 0, 1.5, 0, 0, 1.5]


@pytest.fixture
def constant_config(tmp_path):
    path = tmp_path / "constant.json"
    path.write_text(json.dumps({
        "family": "constant",
        "params": SCALED_IDENTITY,
        "eps_list": [0.5, 0.25, 0.125],
        "cell_n": 8,
        "flux_field": None,
        "solve": {"eps": 0.25},
    }))
    return path


def read_json(path: Path):
    return json.loads(path.read_text())


def test_malformed_config_exits_two(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["cell", "--config", str(constant_config), "--out", str(out), "--set", "cell_n=5"])
    assert code == 2
    error = read_json(out / "error.json")
    assert error["key"] == "cell_n"
    assert error["exit_code"] == 2


def test_unknown_key_exits_two(tmp_path):
    out = tmp_path / "out"
    assert main(["cell", "--out", str(out), "--set", "cell_size=16"]) == 2
    assert read_json(out / "error.json")["error"] == "ConfigError"


def test_bad_override_syntax_exits_two(tmp_path):
    out = tmp_path / "out"
    assert main(["rates", "--out", str(out), "--set", "cell_n"]) == 2


def test_missing_config_file_exits_two(tmp_path):
    out = tmp_path / "out"
    assert main(["cell", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert read_json(out / "error.json")["key"] == "config"


def test_cell_constant_family(tmp_path, constant_config):
    out = tmp_path / "out"
    assert main(["cell", "--config", str(constant_config), "--out", str(out)]) == 0
    payload = read_json(out / "cell.json")
    assert payload["failures"] == []
    assert payload["corrector"]["chi_l2"] < 1e-12


def test_effective_writes_tensor_and_dumps(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["effective", "--config", str(constant_config), "--out", str(out), "--dump-fields"])
    assert code == 0
    a_hat = read_json(out / "effective.json")["effective_tensor"]["a_hat"]
    assert a_hat[0][0][0][0] == pytest.approx(1.5, abs=1e-10)
    assert (out / "fields" / "chi_11.csv").exists()
    assert (out / "fields" / "pi_22.json").exists()


def test_rates_writes_report(tmp_path, constant_config):
    out = tmp_path / "out"
    assert main(["rates", "--config", str(constant_config), "--out", str(out)]) == 0
    with open(out / "report.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["eps", "l2_u_err", "h1_v_err", "l2_p_err", "div_v", "u0_h2"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 0.25, 0.125]
    report = read_json(out / "report.json")
    assert set(report["slopes"]) == {"l2_u_err", "h1_v_err", "l2_p_err"}
    assert "config_hash" in report["metadata"]


def test_rates_report_is_reproducible(tmp_path, constant_config):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["rates", "--config", str(constant_config), "--out", str(first)]) == 0
    assert main(["rates", "--config", str(constant_config), "--out", str(second), "--workers", "2"]) == 0
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()


def test_two_eps_values_exit_three(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["rates", "--config", str(constant_config), "--out", str(out),
                 "--set", "family=trig", "--set", "params=[0.5, 0.4]",
                 "--set", "eps_list=[0.5, 0.25]"])
    assert code == 3
    assert (out / "report.csv").exists()
    assert read_json(out / "error.json")["error"] == "InsufficientDataError"


def test_solve_writes_flows(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["solve", "--config", str(constant_config), "--out", str(out),
                 "--set", "solve.adjoint=true"])
    assert code == 0
    payload = read_json(out / "solve.json")
    assert payload["m"] == 32
    assert payload["l2_u_err"] < 1e-10
    assert payload["adjoint"]["pairing"]["relative_gap"] < 1e-8


def test_workers_from_environment(tmp_path, constant_config, monkeypatch):
    monkeypatch.setenv("HOMOG_WORKERS", "many")
    out = tmp_path / "out"
    assert main(["cell", "--config", str(constant_config), "--out", str(out)]) == 2
    assert read_json(out / "error.json")["key"] == "workers"


def test_verify_restricted_to_check(tmp_path):
    out = tmp_path / "out"
    assert main(["verify", "--out", str(out), "--check", "GRID-001"]) == 0
    results = read_json(out / "verify.json")["results"]
    assert [r["check_id"] for r in results] == ["GRID-001"]
    assert results[0]["status"] == "PASS"


def test_verify_unknown_check_exits_two(tmp_path):
    out = tmp_path / "out"
    assert main(["verify", "--out", str(out), "--check", "GRID-999"]) == 2


def test_constant_two_eps_values_exit_three(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["rates", "--config", str(constant_config), "--out", str(out),
                 "--set", "eps_list=[0.5, 0.25]"])
    assert code == 3
    report = read_json(out / "report.json")
    assert report["metadata"]["insufficient_data"]
    assert {s["flag"] for s in report["slopes"].values()} == {"insufficient-data"}


def test_rates_records_flux_verdict(tmp_path, constant_config):
    out = tmp_path / "out"
    code = main(["rates", "--config", str(constant_config), "--out", str(out),
                 "--set", 'flux_field=[["1", "x2"], ["x1", "1"]]'])
    assert code == 0
    report = read_json(out / "report.json")
    assert len(report["flux"]) == 3
    assert report["flux_decreasing"] is True
    assert report["passed"] is True


def test_effective_laminate_gates_oracle(tmp_path, constant_config):
    out = tmp_path / "out"
    args = ["effective", "--config", str(constant_config), "--out", str(out),
            "--set", "family=laminate", "--set", "params=[1.0, 4.0]", "--set", "cell_n=16"]
    assert main(args) == 0
    payload = read_json(out / "effective.json")
    assert payload["oracle"]["a_hat_gap"] <= 1e-6
    assert payload["oracle"]["harmonic_mean"] == pytest.approx(1.6)

    strict = tmp_path / "strict"
    assert main(args[:3] + [str(strict)] + args[5:] + ["--set", "tolerances.oracle=1e-30"]) == 1
    assert "laminate_oracle" in read_json(strict / "effective.json")["failures"]
