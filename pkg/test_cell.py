#!/usr/bin/env python
"""
Tests for the periodic cell problems
"""

import dataclasses
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stokes_homog.core import cell
from stokes_homog.core.errors import CompatibilityError
from stokes_homog.core.mesh import CellGrid
from stokes_homog.core.norms import quadrature_l2
from stokes_homog.models.coefficient import adjoint, builtin_family
from stokes_homog.models.study import Tolerances
from stokes_homog.tools.oracles import LaminateOracle

SLOW = pytest.mark.skipif(os.getenv("HOMOG_RUN_SLOW") != "1", reason="set HOMOG_RUN_SLOW=1")

IDENTITY_16 = [1.0, 0, 0, 1.0, 0, 0, 0, 0, 0, 0, 0, 0, 1.0, 0, 0, 1.0]


def cell_pipeline(A, n):
    grid = CellGrid(n=n)
    c = cell.solve_cell(A, grid)
    ahat = cell.effective_tensor(A, c, grid)
    return grid, c, ahat


@pytest.mark.parametrize("family, params", [
    ("constant", IDENTITY_16),
    ("constant", [1.8, 0, 0, 1.5, 0, 0, 0.3, 0, 0, 0.3, 0, 0, 1.5, 0, 0, 1.8]),
    ("classical", [0.6]),
])
def test_constant_coefficients_need_no_correction(family, params):
    A = builtin_family(family, params)
    grid, c, ahat = cell_pipeline(A, 8)
    norms = c.norms()
    assert norms["chi_l2"] < 1e-10
    assert norms["pi_l2"] < 1e-10
    assert np.abs(ahat.a_hat - A.eval(np.zeros(2))).max() < 1e-12


@pytest.mark.parametrize("n", [16, 32])
def test_sharp_laminate_matches_oracle(n):
    A = builtin_family("laminate", [1.0, 4.0])
    grid, c, ahat = cell_pipeline(A, n)
    oracle = LaminateOracle.from_coefficient(A)
    assert np.abs(ahat.a_hat - oracle.a_hat).max() < 1e-6
    assert ahat.a_hat[0, 0, 1, 1] == pytest.approx(1.6, abs=1e-6)
    assert ahat.a_hat[1, 1, 0, 0] == pytest.approx(2.5, abs=1e-6)

    E, Q = grid.quadrature_points.shape[:2]
    points = grid.quadrature_points.reshape(-1, 2)
    chi_num = grid.evaluate(2, c.chi.reshape(8, -1), 0)
    chi_ref = oracle.chi(points).reshape(E, Q, 8)
    assert quadrature_l2(grid, chi_num - chi_ref) < 1e-6
    pi_ref = oracle.pi(points).reshape(E, Q, 2, 2)
    assert quadrature_l2(grid, c.pi_quadrature() - pi_ref) < 1e-6


def test_sharp_laminate_pressure_is_lifted():
    A = builtin_family("laminate", [1.0, 4.0])
    _, c, _ = cell_pipeline(A, 16)
    # the jump of pi_1^1 is carried by the lift, the Q1 part stays at zero
    assert np.abs(c.pi).max() < 1e-8
    lift = c.pi_lift(np.array([[0.25, 0.3], [0.75, 0.3]]))
    assert lift[:, 0, 0].tolist() == [-1.5, 1.5]
    assert np.abs(lift[:, 0, 1]).max() == 0.0


def test_sharp_laminate_means():
    oracle = LaminateOracle.from_coefficient(builtin_family("laminate", [1.0, 4.0]))
    assert oracle.harmonic == pytest.approx(1.0 / ((1.0 / 1.0 + 1.0 / 4.0) / 2.0), rel=1e-12)
    assert oracle.harmonic == pytest.approx(1.6, rel=1e-12)
    assert oracle.arithmetic == pytest.approx(2.5, rel=1e-12)
    # chi_1^{22} is piecewise linear with slopes c/a - 1
    y = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0], [0.75, 0.0]])
    profile = oracle.chi(y)[:, 0, 1, 1]
    assert profile[1] - profile[0] == pytest.approx(0.25 * (1.6 - 1.0), abs=1e-12)
    assert profile[3] - profile[2] == pytest.approx(0.25 * (1.6 / 4.0 - 1.0), abs=1e-12)


def test_graded_laminate_means():
    oracle = LaminateOracle.from_coefficient(builtin_family("laminate", [1.0, 4.0, 1.0]))
    assert oracle.harmonic == pytest.approx(2.0, rel=1e-9)
    assert oracle.arithmetic == pytest.approx(2.5, rel=1e-9)


def test_graded_laminate_converges_to_oracle():
    A = builtin_family("laminate", [1.0, 4.0, 1.0])
    _, _, ahat = cell_pipeline(A, 32)
    assert np.abs(ahat.a_hat - LaminateOracle.from_coefficient(A).a_hat).max() < 1e-4


def test_cell_identities_trig():
    A = builtin_family("trig", [0.5, 0.4])
    grid, c, ahat = cell_pipeline(A, 32)
    bf = cell.b_field(A, c, ahat, grid)
    dc = cell.dual_correctors(bf, c, grid)
    diag = cell.verify_cell_identities(A, c, ahat, bf, dc, grid)

    assert diag.failures(Tolerances()) == []
    assert diag.antisymmetry == 0.0
    assert diag.extras["relation_dual"] < 1e-8
    assert diag.relation_relative < 1e-1
    assert diag.decomposition_relative < 1e-1
    assert diag.mean_b < 1e-8
    assert diag.ellipticity_floor > 0.0
    assert diag.q_l2 > 0.0 and diag.phi_l2 > 0.0


@pytest.mark.parametrize("family, params", [("trig", [0.5, 0.4]), ("checkerboard", [1.0, 3.0])])
def test_adjoint_symmetry_of_effective_tensor(family, params):
    A = builtin_family(family, params)
    _, _, ahat = cell_pipeline(A, 16)
    _, _, ahat_star = cell_pipeline(adjoint(A), 16)
    assert np.abs(ahat_star.a_hat - ahat.adjoint().a_hat).max() < 1e-8


def test_effective_tensor_is_elliptic():
    A = builtin_family("checkerboard", [1.0, 3.0])
    _, _, ahat = cell_pipeline(A, 16)
    assert ahat.ellipticity_floor() > 0.0
    assert ahat.symmetric_eigenvalues().min() > 0.0


def test_dual_correctors_reject_pressure_with_mean():
    A = builtin_family("trig", [0.5, 0.4])
    grid, c, ahat = cell_pipeline(A, 8)
    bf = cell.b_field(A, c, ahat, grid)
    shifted = dataclasses.replace(c, pi=c.pi + 1.0)
    with pytest.raises(CompatibilityError) as info:
        cell.dual_correctors(bf, shifted, grid)
    assert info.value.key == "pi"


def identities(A, n):
    grid, c, ahat = cell_pipeline(A, n)
    bf = cell.b_field(A, c, ahat, grid)
    dc = cell.dual_correctors(bf, c, grid)
    return cell.verify_cell_identities(A, c, ahat, bf, dc, grid)


def test_reconstruction_residuals_decrease_under_refinement():
    A = builtin_family("trig", [0.5, 0.4])
    coarse, fine = identities(A, 16), identities(A, 32)
    assert fine.decomposition_residual < coarse.decomposition_residual
    assert fine.relation_residual < coarse.relation_residual
    assert fine.decomposition_relative < 1e-1


def test_sharp_laminate_identities_hold():
    diag = identities(builtin_family("laminate", [1.0, 4.0]), 16)
    assert diag.failures(Tolerances()) == []
    assert diag.mean_pi < 1e-10
    assert diag.relation_relative < 1e-6


@SLOW
def test_decomposition_residual_converges():
    A = builtin_family("trig", [0.5, 0.4])
    diags = [identities(A, n) for n in (32, 64, 128)]
    dual = [d.extras["decomposition_dual"] for d in diags]
    assert min(np.log2(a / b) for a, b in zip(dual, dual[1:])) >= 1.8
    l2 = [d.decomposition_residual for d in diags]
    assert min(np.log2(a / b) for a, b in zip(l2, l2[1:])) >= 1.0


@SLOW
def test_sharp_laminate_oracle_fine_grid():
    A = builtin_family("laminate", [1.0, 4.0])
    _, _, ahat = cell_pipeline(A, 128)
    assert np.abs(ahat.a_hat - LaminateOracle.from_coefficient(A).a_hat).max() <= 1e-6
