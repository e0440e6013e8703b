#!/usr/bin/env python
"""
Tests for slope fitting, boundary-layer profiles and the eps-sweep study
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stokes_homog.core.errors import ConfigError, InsufficientDataError
from stokes_homog.core.executor import StudyExecutor
from stokes_homog.core.mesh import DomainMesh, domain_mesh_for
from stokes_homog.core.neumann import solve_adjoint
from stokes_homog.core.rates import boundary_layer_profile, fit_slope
from stokes_homog.models.coefficient import builtin_family
from stokes_homog.models.fields import FlowField, GaugeRecord, GridFunction, SpaceTag
from stokes_homog.models.report import RateReport, RateRow
from stokes_homog.models.study import load_config, validate_config
from stokes_homog.tools.manufactured import bump_field

SLOW = pytest.mark.skipif(os.getenv("HOMOG_RUN_SLOW") != "1", reason="set HOMOG_RUN_SLOW=1")

SCALED_IDENTITY = [1.5, 0, 0, 1.5, 0, 0, 0, 0, 0, 0, 0, 0, 1.5, 0, 0, 1.5]
EPS = [0.25, 0.125, 0.0625, 0.03125]


def constant_config(**overrides):
    data = {
        "family": "constant",
        "params": SCALED_IDENTITY,
        "eps_list": [0.5, 0.25, 0.125],
        "cell_n": 8,
        "flux_field": None,
    }
    data.update(overrides)
    return validate_config(data)


def as_flow(u):
    p = GridFunction.zeros(SpaceTag.PRESSURE_Q1, u.mesh)
    return FlowField(u=u, p=p, gauge=GaugeRecord(np.zeros(2), 0.0))


# ---------------------------------------------------------------------- #
# fit_slope
# ---------------------------------------------------------------------- #
def test_linear_errors_fit_slope_one():
    fit = fit_slope([(e, e) for e in EPS])
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 4


def test_sqrt_errors_fit_slope_half():
    fit = fit_slope([(e, 2.0 * np.sqrt(e)) for e in EPS])
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert np.exp(fit.intercept) == pytest.approx(2.0)


def test_noisy_power_law():
    rng = np.random.default_rng(0)
    eps = np.array(EPS)
    err = 3.0 * eps ** 1.2 * (1.0 + 0.01 * rng.standard_normal(len(eps)))
    assert 1.1 <= fit_slope(list(zip(eps, err))).slope <= 1.3


def test_two_points_are_insufficient():
    with pytest.raises(InsufficientDataError) as info:
        fit_slope([(0.5, 0.1), (0.25, 0.05)])
    assert info.value.exit_code == 3


def test_nonpositive_errors_rejected():
    with pytest.raises(ConfigError):
        fit_slope([(0.5, 0.1), (0.25, 0.0), (0.125, 0.01)])


# ---------------------------------------------------------------------- #
# Boundary-layer profile
# ---------------------------------------------------------------------- #
def test_profile_of_linear_field_is_strip_area():
    eps = 0.125
    mesh = DomainMesh(n=32)
    u = GridFunction.interpolate(SpaceTag.VELOCITY_Q2,
                                 lambda x: np.stack([x[:, 0] - 0.5, np.zeros(len(x))], axis=1), mesh)
    profile = boundary_layer_profile(as_flow(u), None, eps, mesh)
    area = 1.0 - (1.0 - 4.0 * eps) ** 2
    assert profile.strip_grad == pytest.approx(np.sqrt(area), abs=1e-12)
    assert profile.ratio == pytest.approx(np.sqrt(area / eps), abs=1e-12)
    assert profile.strip_grad_diff is None


def test_profile_difference_with_itself_is_zero():
    mesh = DomainMesh(n=16)
    u = GridFunction.interpolate(SpaceTag.VELOCITY_Q2,
                                 lambda x: np.stack([np.sin(x[:, 1]), x[:, 0] ** 2], axis=1), mesh)
    profile = boundary_layer_profile(as_flow(u), as_flow(u), 0.125, mesh)
    assert profile.strip_grad > 0.0
    assert profile.strip_grad_diff == 0.0


def adjoint_bump_ratios(eps_list):
    A = builtin_family("trig", [0.5, 0.4])
    H = bump_field((0.4, 0.6), 0.25)
    ratios = []
    for eps in eps_list:
        mesh = domain_mesh_for(eps, int(round(8 / eps)))
        adj = solve_adjoint(A, eps, H, mesh)
        ratios.append(boundary_layer_profile(adj, None, eps, mesh).ratio)
    return ratios


def test_adjoint_bump_profile_is_stable_in_eps():
    ratios = adjoint_bump_ratios((0.25, 0.125))
    assert min(ratios) > 0.0
    assert max(ratios) <= 2.0 * min(ratios)


@SLOW
def test_adjoint_bump_profile_over_three_halvings():
    ratios = adjoint_bump_ratios((0.25, 0.125, 0.0625))
    assert max(ratios) <= 2.0 * min(ratios)


# ---------------------------------------------------------------------- #
# Study
# ---------------------------------------------------------------------- #
def test_constant_coefficient_study_hits_noise_floor():
    report = StudyExecutor(constant_config()).run_study()
    assert [r.eps for r in report.rows] == [0.5, 0.25, 0.125]
    assert all(s.flag == "noise-floor" for s in report.slopes.values())
    assert report.gates_passed
    assert report.div_identity_passed
    assert not report.metadata["insufficient_data"]


def test_short_sweep_is_flagged_insufficient():
    cfg = validate_config({"family": "trig", "params": [0.5, 0.4], "eps_list": [0.5, 0.25],
                           "cell_n": 8, "flux_field": None})
    report = StudyExecutor(cfg).run_study()
    assert report.metadata["insufficient_data"]
    assert any(s.flag == "insufficient-data" for s in report.slopes.values())


def test_csv_rows_are_reproducible():
    first = StudyExecutor(constant_config()).run_study()
    second = StudyExecutor(constant_config(workers=2)).run_study()
    assert [r.csv_row() for r in first.rows] == [r.csv_row() for r in second.rows]
    assert first.metadata["config_hash"] != second.metadata["config_hash"]


def test_inversions_are_warned():
    executor = StudyExecutor(constant_config())
    report = RateReport(rows=[
        RateRow(eps=e, m=16, l2_u_err=v, h1_v_err=v, l2_p_err=v, div_v=0.0, u0_h2=1.0)
        for e, v in [(0.5, 1e-2), (0.25, 5e-3), (0.125, 8e-3)]
    ])
    executor._flag_inversions(report)
    assert len(report.warnings) == 3
    assert all("inversion at eps=0.125" in w for w in report.warnings)


def test_mesh_rule_resolves_eps():
    cfg = constant_config()
    assert cfg.m_list == [16, 32, 64]
    assert all(m * e >= 8 for m, e in zip(cfg.m_list, cfg.eps_list))


@SLOW
def test_trig_study_meets_rate_gates():
    cfg = load_config(Path(__file__).parent / "study_configs" / "trig_study.json", workers=4)
    executor = StudyExecutor(cfg)
    report = executor.run_study()
    assert report.slopes["l2_u_err"].slope >= 0.9
    assert report.slopes["l2_u_err"].r2 >= 0.98
    assert report.slopes["h1_v_err"].slope >= 0.45
    assert report.slopes["l2_p_err"].slope >= 0.45
    assert report.div_identity_passed
    flux = executor.flux_convergence()
    assert flux["decreasing"]
    assert flux["rows"][-1]["error"] < flux["rows"][0]["error"]


def test_short_constant_sweep_is_insufficient_not_noise():
    report = StudyExecutor(constant_config(eps_list=[0.5, 0.25])).run_study()
    assert report.metadata["insufficient_data"]
    assert all(s.flag == "insufficient-data" for s in report.slopes.values())


# ---------------------------------------------------------------------- #
# Flux pairing
# ---------------------------------------------------------------------- #
def test_zero_flux_field_pairs_to_zero():
    flux = StudyExecutor(constant_config()).flux_convergence()
    assert [r["error"] for r in flux["rows"]] == [0.0, 0.0, 0.0]
    assert flux["decreasing"]


def test_flux_round_off_counts_as_decreasing():
    executor = StudyExecutor(constant_config())
    flux = executor.flux_convergence(lambda x: np.ones(np.shape(x)[:-1] + (2, 2)))
    assert all(r["error"] <= r["floor"] for r in flux["rows"])
    assert flux["decreasing"]


def test_growing_flux_fails_the_report():
    report = RateReport(flux=[{"eps": 0.5, "error": 1e-3}, {"eps": 0.25, "error": 2e-3}],
                        flux_decreasing=False)
    assert report.gates_passed and report.div_identity_passed
    assert not report.passed
    assert report.to_dict()["flux_decreasing"] is False
    assert RateReport(flux_decreasing=None).passed
