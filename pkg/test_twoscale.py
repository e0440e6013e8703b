#!/usr/bin/env python
"""
Tests for extension, Steklov smoothing, periodic sampling and expansion residuals
"""

import dataclasses
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stokes_homog.core import cell
from stokes_homog.core.errors import GaugeError, MeshError
from stokes_homog.core.mesh import CellGrid, DomainMesh, domain_mesh_for
from stokes_homog.core.neumann import solve_homogenized, solve_oscillating
from stokes_homog.core.norms import quadrature_l2
from stokes_homog.core.twoscale import (
    C_EXT_BOUND, ExtendedField, assemble_residuals, boundary_layer_norm, extend,
    periodic_product_bound, sample_periodic, steklov, steklov_error_ratio, steklov_quadrature,
    steklov_shifts,
)
from stokes_homog.models.coefficient import builtin_family
from stokes_homog.models.fields import FlowField, GaugeRecord, GridFunction, SpaceTag
from stokes_homog.models.report import DIV_IDENTITY_REL
from stokes_homog.tools.manufactured import default_problem

SCALED_IDENTITY = [1.5, 0, 0, 1.5, 0, 0, 0, 0, 0, 0, 0, 0, 1.5, 0, 0, 1.5]


def scalar(mesh, func):
    return GridFunction.interpolate(SpaceTag.SCALAR_Q2, func, mesh)


# ---------------------------------------------------------------------- #
# Extension
# ---------------------------------------------------------------------- #
def test_extension_reflects_evenly():
    mesh = domain_mesh_for(0.25, 32)
    x1 = scalar(mesh, lambda x: x[:, 0])
    ext = extend(x1, mesh)
    nodes = ext.padded.mesh.node_coordinates(2)
    right = nodes[:, 0] > 1.0
    left = nodes[:, 0] < 0.0
    assert np.allclose(ext.padded.values[0, right], 2.0 - nodes[right, 0], atol=1e-12)
    assert np.allclose(ext.padded.values[0, left], -nodes[left, 0], atol=1e-12)
    assert ext.c_ext <= C_EXT_BOUND


def test_extension_keeps_interior_values():
    mesh = domain_mesh_for(0.25, 16)
    u = scalar(mesh, lambda x: np.cos(np.pi * x[:, 0]) * x[:, 1])
    ext = extend(u, mesh)
    nodes = mesh.node_coordinates(2)
    assert np.abs(ext.padded.at_points(nodes) - u.at_points(nodes)).max() < 1e-12


def test_extension_needs_wide_enough_pad():
    mesh = domain_mesh_for(0.125, 16)
    u = scalar(mesh, lambda x: x[:, 0])
    with pytest.raises(MeshError):
        extend(u, mesh, eps_max=0.5)


def test_unpadded_mesh_cannot_extend():
    mesh = DomainMesh(n=8, pad=0)
    with pytest.raises(MeshError):
        extend(scalar(mesh, lambda x: x[:, 0]), mesh)


# ---------------------------------------------------------------------- #
# Steklov smoothing
# ---------------------------------------------------------------------- #
def test_shift_count_resolves_mesh():
    shifts = steklov_shifts(0.25, 1.0 / 32, 2)
    assert shifts.shape == (64, 2)
    assert np.allclose(shifts.mean(axis=0), 0.5)


@pytest.mark.parametrize("eps", [0.125, 0.0625])
def test_steklov_constant_and_linear(eps):
    mesh = domain_mesh_for(0.125, 32)
    const = ExtendedField.from_function(SpaceTag.SCALAR_Q2, lambda x: np.full(len(x), 1.7), mesh)
    linear = ExtendedField.from_function(SpaceTag.SCALAR_Q2, lambda x: x[:, 0], mesh)
    nodes = mesh.node_coordinates(2)
    assert np.abs(steklov(const, eps).values - 1.7).max() < 1e-12
    assert np.abs(steklov(linear, eps).values[0] - (nodes[:, 0] - eps / 2)).max() < 1e-10


def test_steklov_error_bounded_by_gradient():
    mesh = domain_mesh_for(0.125, 32)
    ext = extend(scalar(mesh, lambda x: np.sin(np.pi * x[:, 0])), mesh, 0.125)
    for eps in (0.125, 0.0625, 0.03125):
        assert steklov_error_ratio(ext, eps) <= 1.0


def test_steklov_is_contraction():
    mesh = domain_mesh_for(0.125, 32)
    ext = extend(scalar(mesh, lambda x: np.sin(3 * x[:, 0]) + x[:, 1] ** 2), mesh, 0.125)
    smoothed = quadrature_l2(mesh, steklov_quadrature(ext, 0.125))
    padded = quadrature_l2(ext.padded.mesh, ext.padded.at_quadrature())
    assert smoothed <= padded + 1e-10


# ---------------------------------------------------------------------- #
# Periodic sampling
# ---------------------------------------------------------------------- #
def test_sampling_matches_cell_function():
    eps = 0.25
    mesh = DomainMesh(n=32)
    grid = CellGrid(n=32)
    wave = GridFunction.interpolate(SpaceTag.CELL_SCALAR_Q2,
                                    lambda y: np.sin(2 * np.pi * y[:, 0]), grid)
    sampled = sample_periodic(wave, eps, mesh)
    nodes = mesh.node_coordinates(2)
    assert sampled.space_tag == SpaceTag.SCALAR_Q2
    assert np.abs(sampled.values[0] - np.sin(2 * np.pi * nodes[:, 0] / eps)).max() < 1e-12


def test_sampling_needs_cell_field():
    mesh = DomainMesh(n=8)
    with pytest.raises(MeshError):
        sample_periodic(scalar(mesh, lambda x: x[:, 0]), 0.25, mesh)


def test_periodic_product_bound():
    eps = 0.125
    mesh = domain_mesh_for(eps, 32)
    grid = CellGrid(n=16)
    f = GridFunction.interpolate(SpaceTag.CELL_SCALAR_Q2,
                                 lambda y: 1.0 + np.sin(2 * np.pi * y[:, 0]) * np.cos(2 * np.pi * y[:, 1]),
                                 grid)
    u = extend(scalar(mesh, lambda x: np.exp(x[:, 0]) * x[:, 1]), mesh, eps)
    bound = periodic_product_bound(f, u, eps)
    assert bound["lhs"] <= bound["rhs"]


def test_boundary_layer_scales_like_sqrt_eps():
    eps_list = [0.25, 0.125, 0.0625]
    mesh = domain_mesh_for(max(eps_list), 32)
    grid = CellGrid(n=16)
    f = GridFunction.interpolate(SpaceTag.CELL_SCALAR_Q2,
                                 lambda y: 1.0 + 0.5 * np.sin(2 * np.pi * y[:, 0]), grid)
    u = extend(scalar(mesh, lambda x: 1.0 + x[:, 0] * x[:, 1]), mesh, max(eps_list))
    ratios = [boundary_layer_norm(f, u, eps)["ratio"] for eps in eps_list]
    assert max(ratios) / min(ratios) < 4.0


# ---------------------------------------------------------------------- #
# Residuals
# ---------------------------------------------------------------------- #
def solve_pair(A, eps, n=16, m=32):
    grid = CellGrid(n=n)
    mesh = domain_mesh_for(eps, m)
    c = cell.solve_cell(A, grid)
    ahat = cell.effective_tensor(A, c, grid)
    data = default_problem(mesh)
    return c, mesh, solve_oscillating(A, eps, data, mesh), solve_homogenized(ahat, data, mesh)


def test_constant_coefficient_residuals_vanish():
    A = builtin_family("constant", SCALED_IDENTITY)
    c, mesh, ue, u0 = solve_pair(A, 0.25, n=8)
    res = assemble_residuals(ue, u0, c, 0.25, mesh)
    assert res.h1_v < 1e-8
    assert res.l2_p < 1e-8


def test_div_identity_holds_weakly():
    A = builtin_family("trig", [0.5, 0.4])
    eps = 0.25
    c, mesh, ue, u0 = solve_pair(A, eps)
    res = assemble_residuals(ue, u0, c, eps, mesh)
    assert res.corrector_gradient_l2 > 0.0
    assert res.div_identity_weak <= DIV_IDENTITY_REL * res.corrector_gradient_l2
    # the pointwise residual is a discretization quantity, the weak one only sees div_y chi
    assert res.div_identity_weak <= res.div_identity_raw
    norms = res.norms()
    assert set(norms) >= {"h1_v", "l2_p", "div_v", "div_identity_raw", "div_identity_weak",
                          "corrector_gradient_l2"}


def test_div_identity_fails_for_compressible_corrector():
    A = builtin_family("trig", [0.5, 0.4])
    eps = 0.25
    c, mesh, ue, u0 = solve_pair(A, eps)
    y = c.grid.node_coordinates(2)
    chi = c.chi.copy()
    for j in range(2):
        for b in range(2):
            chi[j, b, j] += 0.5 * np.sin(2.0 * np.pi * y[:, j])
    res = assemble_residuals(ue, u0, dataclasses.replace(c, chi=chi), eps, mesh)
    assert res.div_identity_weak > DIV_IDENTITY_REL * res.corrector_gradient_l2
    assert res.div_identity_weak > 10.0 * assemble_residuals(ue, u0, c, eps, mesh).div_identity_weak


def test_residuals_need_gauged_flows():
    A = builtin_family("classical", [1.0])
    c, mesh, ue, u0 = solve_pair(A, 0.25, n=8)
    shifted = GridFunction.interpolate(SpaceTag.VELOCITY_Q2,
                                       lambda x: np.ones((len(x), 2)), mesh) + ue.u
    ungauged = FlowField(u=shifted, p=ue.p, gauge=GaugeRecord(np.zeros(2), 0.0))
    with pytest.raises(GaugeError):
        assemble_residuals(ungauged, u0, c, 0.25, mesh)


def test_residuals_need_shared_mesh():
    A = builtin_family("classical", [1.0])
    c, mesh, ue, u0 = solve_pair(A, 0.25, n=8)
    with pytest.raises(MeshError):
        assemble_residuals(ue, u0, c, 0.25, domain_mesh_for(0.25, 16))
