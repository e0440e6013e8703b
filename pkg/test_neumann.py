#!/usr/bin/env python
"""
Tests for the Neumann Stokes solvers
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stokes_homog.core.errors import AnalyticGradientError, CompatibilityError, UnderResolvedError
from stokes_homog.core.mesh import DomainMesh
from stokes_homog.core.neumann import (
    adjoint_data, assemble_load, duality_pairing, energy_norm, solve_adjoint, solve_neumann,
    solve_oscillating,
)
from stokes_homog.core.norms import integrate, l2_norm, mean, quadrature_l2, subtract_mean
from stokes_homog.core.rates import mms_study
from stokes_homog.models.coefficient import builtin_family
from stokes_homog.models.fields import ProblemData
from stokes_homog.tools.manufactured import bump_field, default_problem, manufactured_problem

U_STAR = ["sin(pi*x2)", "sin(pi*x1)"]
P_STAR = "cos(pi*x1)"


def zero_data():
    return ProblemData(
        F=lambda x: np.zeros(np.shape(x)),
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        f=lambda x, n: np.zeros(np.shape(x)),
    )


def test_zero_data_gives_zero_solution():
    mesh = DomainMesh(n=8)
    flow = solve_neumann(builtin_family("classical", [1.0]).eval, zero_data(), mesh)
    assert l2_norm(flow.u) < 1e-12
    assert l2_norm(subtract_mean(flow.p)) < 1e-12


def test_incompatible_data_rejected():
    mesh = DomainMesh(n=8)
    data = ProblemData(
        F=lambda x: np.ones(np.shape(x)),
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        f=lambda x, n: np.zeros(np.shape(x)),
    )
    with pytest.raises(CompatibilityError) as info:
        solve_neumann(builtin_family("classical", [1.0]).eval, data, mesh)
    assert info.value.key == "data_spec"


def test_default_data_are_compatible():
    mesh = DomainMesh(n=16)
    load = assemble_load(default_problem(mesh), mesh)
    assert load.defect <= 1e-12 * load.scale


@pytest.mark.parametrize("eps, m", [(0.25, 16), (1.5, 64), (0.0, 64)])
def test_under_resolved_meshes_rejected(eps, m):
    A = builtin_family("trig", [0.5, 0.4])
    mesh = DomainMesh(n=m)
    with pytest.raises(UnderResolvedError):
        solve_oscillating(A, eps, default_problem(mesh), mesh)


def test_gauge_is_applied_and_recorded():
    A = builtin_family("trig", [0.5, 0.4])
    mesh = DomainMesh(n=16)
    flow = solve_oscillating(A, 0.5, default_problem(mesh), mesh)
    assert np.abs(mean(flow.u)).max() < 1e-12
    assert flow.gauge.pressure_mean == pytest.approx(mean(flow.p), abs=1e-12)
    assert flow.gauge.multipliers.shape == (2,)
    assert flow.residual < 1e-10


def test_mms_orders_constant_coefficients():
    report = mms_study(builtin_family("classical", [1.0]), [16, 32, 64], U_STAR, P_STAR)
    assert report.orders["h1_u"].slope == pytest.approx(2.0, abs=0.2)
    assert report.orders["l2_u"].slope == pytest.approx(3.0, abs=0.3)
    assert report.orders["l2_p"].slope == pytest.approx(2.0, abs=0.3)
    assert all(r.residual < 1e-10 for r in report.rows)


def test_mms_oscillating_coefficient_converges():
    report = mms_study(builtin_family("trig", [0.5, 0.4]), [16, 32, 64], U_STAR, P_STAR, eps=0.5)
    assert report.orders["h1_u"].slope > 1.7
    h1 = [r.h1_u for r in report.rows]
    assert h1 == sorted(h1, reverse=True)


def test_manufactured_data_need_analytic_gradient():
    mesh = DomainMesh(n=8)
    with pytest.raises(AnalyticGradientError):
        manufactured_problem(builtin_family("checkerboard", [1.0, 3.0]), 1.0, mesh, U_STAR, P_STAR)


def test_oscillating_solution_self_converges():
    A = builtin_family("trig", [0.5, 0.4])
    flows = {}
    for m in (16, 32, 64):
        mesh = DomainMesh(n=m)
        flows[m] = solve_oscillating(A, 0.5, default_problem(mesh), mesh)
    fine = flows[64]
    X = fine.mesh.quadrature_points
    pts = X.reshape(-1, 2)

    def gap(m):
        coarse = flows[m].u.at_points(pts).reshape(X.shape[:2] + (2,))
        return quadrature_l2(fine.mesh, coarse - fine.u.at_quadrature())

    assert gap(32) < gap(16) / 4.0


def test_energy_norm_stable_under_refinement():
    A = builtin_family("trig", [0.5, 0.4])
    values = []
    for m in (16, 32, 64):
        mesh = DomainMesh(n=m)
        values.append(energy_norm(solve_oscillating(A, 0.5, default_problem(mesh), mesh)))
    assert (max(values) - min(values)) / max(values) < 0.05


def test_adjoint_data_are_mean_free():
    mesh = DomainMesh(n=16)
    data = adjoint_data(bump_field((0.4, 0.6), 0.25), mesh)
    F = data.F(mesh.quadrature_points)
    assert np.abs(integrate(mesh, F)).max() < 1e-14


def test_duality_pairing_agrees():
    A = builtin_family("trig", [0.5, 0.4])
    eps = 0.125
    mesh = DomainMesh(n=64)
    H = bump_field((0.4, 0.6), 0.25)
    adjoint_flow = solve_adjoint(A, eps, H, mesh)
    v = solve_oscillating(A, eps, default_problem(mesh), mesh).u
    pairing = duality_pairing(adjoint_flow, v, A, eps, H, mesh)
    assert abs(pairing.direct) > 0.0
    assert pairing.relative_gap < 1e-8


def test_symmetric_adjoint_equals_direct_solve():
    S = builtin_family("classical", [0.8])
    mesh = DomainMesh(n=16)
    H = bump_field()
    direct = solve_neumann(S.eval, adjoint_data(H, mesh), mesh)
    via_adjoint = solve_adjoint(S, 1.0, H, mesh)
    assert l2_norm(direct.u - via_adjoint.u) < 1e-12
