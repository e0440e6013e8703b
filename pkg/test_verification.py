#!/usr/bin/env python
"""
Tests for the YAML-driven verification suite
"""

import dataclasses
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from stokes_homog.core import cell
from stokes_homog.core.errors import ConfigError
from stokes_homog.core.verifier import CheckExecutor
from stokes_homog.models.check import CheckModule

SMALL_SUITE = {
    "suite": {"module": "rates", "name": "small"},
    "small_checks": [
        {"check_id": "T-001", "name": "slopes", "module": "rates", "check_type": "fit_slope"},
        {"check_id": "T-002", "name": "sampling", "module": "twoscale", "check_type": "sampling",
         "parameters": {"m": 16, "n": 16}},
        {"check_id": "T-003", "name": "parked", "module": "rates", "check_type": "fit_slope",
         "status": "inactive"},
    ],
}


def write_suite(directory: Path, suite) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "small_checks.yaml", "w") as f:
        yaml.safe_dump(suite, f)
    return directory


@pytest.fixture(scope="module")
def executor():
    return CheckExecutor()


def test_every_module_has_checks(executor):
    modules = {c.module for c in executor.checks.values()}
    assert modules == set(CheckModule)
    assert "CELL-003" in executor.checks


def test_select_by_module(executor):
    selected = executor.select(modules=["grid"])
    assert selected and all(c.module == CheckModule.GRID for c in selected)


def test_small_suite_runs(tmp_path):
    ex = CheckExecutor(write_suite(tmp_path / "checks", SMALL_SUITE))
    results = {r.check_id: r for r in ex.execute_all()}
    assert results["T-001"].passed and results["T-001"].status == "PASS"
    assert results["T-002"].passed
    assert results["T-003"].skipped
    assert results["T-003"].status == "SKIP"


def test_unknown_check_type_rejected(tmp_path):
    suite = {"bad_checks": [{"check_id": "T-009", "name": "x", "module": "rates",
                             "check_type": "no_such_check"}]}
    with pytest.raises(ConfigError) as info:
        CheckExecutor(write_suite(tmp_path / "checks", suite))
    assert info.value.key == "T-009"


def test_empty_directory_rejected(tmp_path):
    with pytest.raises(ConfigError):
        CheckExecutor(tmp_path)


def test_identities_pass_unmodified(executor):
    result = executor.execute_check("CELL-003")
    assert result.passed, result.failures


def test_halved_flux_potential_is_caught(executor, monkeypatch):
    original = cell.dual_correctors

    def halved(*args, **kwargs):
        dc = original(*args, **kwargs)
        return dataclasses.replace(dc, phi=0.5 * dc.phi)

    monkeypatch.setattr(cell, "dual_correctors", halved)
    result = executor.execute_check("CELL-003")
    assert not result.passed
    assert "decomposition_residual outside tolerance" in result.failures


def test_sign_flipped_flux_is_caught(executor, monkeypatch):
    original = cell.b_field

    def flipped(*args, **kwargs):
        bf = original(*args, **kwargs)
        return cell.BField(b=-bf.b, grid=bf.grid)

    baseline = executor.execute_check("CELL-003").measured["decomposition_relative"]
    monkeypatch.setattr(cell, "b_field", flipped)
    result = executor.execute_check("CELL-003")
    assert result.measured["decomposition_relative"] > 10.0 * baseline
    assert not result.passed
    assert "decomposition_residual outside tolerance" in result.failures
