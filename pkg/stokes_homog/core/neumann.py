"""
Neumann boundary-value problems for the Stokes system on the unit square
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Union

import numpy as np

from .assembly import (
    boundary_load, divergence_matrix, factorize, load_vector, mean_rows,
    stiffness_matrix, stokes_kkt,
)
from .cell import EffectiveTensor
from .errors import CompatibilityError, UnderResolvedError
from .mesh import DomainMesh
from .norms import h1_norm, h2_surrogate, integrate, l2_norm, quadrature_l2, subtract_mean
from ..models.coefficient import CoefficientField, adjoint
from ..models.fields import FlowField, GaugeRecord, GridFunction, ProblemData, SpaceTag

logger = logging.getLogger(__name__)

Coefficient = Union[EffectiveTensor, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class OscillatingCoefficient:
    """x -> A(x / eps)"""
    A: CoefficientField
    eps: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.A.eval(np.asarray(x) / self.eps)


def coefficient_at_quadrature(coeff: Coefficient, mesh: DomainMesh) -> np.ndarray:
    """Constant (d,d,d,d) tensor or Gauss-point values (E,Q,d,d,d,d)"""
    if isinstance(coeff, EffectiveTensor):
        return coeff.a_hat
    if callable(coeff):
        return coeff(mesh.quadrature_points)
    return np.asarray(coeff, dtype=float)


def check_resolution(eps: float, mesh: DomainMesh):
    if not 0.0 < eps <= 1.0:
        raise UnderResolvedError(f"eps={eps} outside (0, 1]", key="eps")
    if mesh.h > eps / 8.0 * (1.0 + 1e-12):
        raise UnderResolvedError(
            f"mesh h=1/{mesh.m} does not resolve eps={eps} (need h <= eps/8)", key="m"
        )


@dataclass
class LoadData:
    """Assembled right-hand side and its compatibility numbers"""
    velocity: np.ndarray
    pressure: np.ndarray
    force_integral: np.ndarray
    traction_integral: np.ndarray
    defect: float
    scale: float


def assemble_load(data: ProblemData, mesh: DomainMesh) -> LoadData:
    X = mesh.quadrature_points
    F_qp = np.asarray(data.F(X), dtype=float)
    g_qp = np.broadcast_to(np.asarray(data.g(X), dtype=float), X.shape[:2])
    b_load, traction_integral, traction_norm = boundary_load(mesh, data.f)
    force_integral = integrate(mesh, F_qp)
    return LoadData(
        velocity=load_vector(mesh, F_qp) + b_load,
        pressure=-load_vector(mesh, g_qp[..., None], order=1),
        force_integral=force_integral,
        traction_integral=traction_integral,
        defect=float(np.linalg.norm(force_integral + traction_integral)),
        scale=quadrature_l2(mesh, F_qp) + traction_norm,
    )


def solve_neumann(coeff: Coefficient, data: ProblemData, mesh: DomainMesh,
                  tol: float = 1e-10, compat_tol: float = 1e-10, label: str = "neumann") -> FlowField:
    """
    Discrete weak form: a(u, v) - (p, div v) = (F, v) + <f, v>, (div u, q) = (g, q),
    with d velocity-mean multipliers and no pressure constraint.
    """
    d = mesh.dim
    n2, n1 = mesh.n_nodes(2), mesh.n_nodes(1)
    nv = d * n2

    load = assemble_load(data, mesh)
    if load.defect > compat_tol * load.scale:
        raise CompatibilityError(
            f"data violate compatibility: |int F + int f| = {load.defect:.3e} "
            f"> {compat_tol:.1e} * {load.scale:.3e}", key="data_spec",
        )

    A_qp = coefficient_at_quadrature(coeff, mesh)
    kkt = stokes_kkt(stiffness_matrix(mesh, A_qp), divergence_matrix(mesh), mean_rows(mesh, 2, d))
    system = factorize(kkt, f"{label} (m={mesh.m})")
    rhs = np.concatenate([load.velocity, load.pressure, np.zeros(d)])
    x, residual = system.solve(rhs, tol)

    u = GridFunction.from_vector(SpaceTag.VELOCITY_Q2, x[:nv], mesh)
    p = GridFunction.from_vector(SpaceTag.PRESSURE_Q1, x[nv:nv + n1], mesh)
    u_mean = integrate(mesh, u.at_quadrature()) / mesh.volume
    u = subtract_mean(u)
    p_mean = float(integrate(mesh, p.at_quadrature())[0] / mesh.volume)
    gauge = GaugeRecord(velocity_mean_removed=np.asarray(u_mean), pressure_mean=p_mean,
                        multipliers=x[nv + n1:].copy())
    return FlowField(u=u, p=p, gauge=gauge, residual=residual, label=label)


def solve_oscillating(A: CoefficientField, eps: float, data: ProblemData, mesh: DomainMesh,
                      tol: float = 1e-10, compat_tol: float = 1e-10) -> FlowField:
    check_resolution(eps, mesh)
    return solve_neumann(OscillatingCoefficient(A, eps), data, mesh, tol, compat_tol,
                         label=f"oscillating {A.name} eps={eps:g}")


def solve_homogenized(ahat: EffectiveTensor, data: ProblemData, mesh: DomainMesh,
                      tol: float = 1e-10, compat_tol: float = 1e-10) -> FlowField:
    flow = solve_neumann(ahat, data, mesh, tol, compat_tol, label="homogenized")
    flow.h2_norm = h2_surrogate(flow.u)
    return flow


def adjoint_data(H: Callable[[np.ndarray], np.ndarray], mesh: DomainMesh) -> ProblemData:
    """Body force H - mean(H), g = 0, homogeneous conormal data"""
    H_mean = integrate(mesh, np.asarray(H(mesh.quadrature_points), dtype=float)) / mesh.volume
    d = mesh.dim
    return ProblemData(
        F=lambda x: np.asarray(H(x), dtype=float) - H_mean,
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        f=lambda x, n: np.zeros(np.shape(x)[:-1] + (d,)),
        label="adjoint",
    )


def solve_adjoint(A: CoefficientField, eps: float, H: Callable[[np.ndarray], np.ndarray],
                  mesh: DomainMesh, tol: float = 1e-10) -> FlowField:
    check_resolution(eps, mesh)
    A_star = adjoint(A)
    return solve_neumann(OscillatingCoefficient(A_star, eps), adjoint_data(H, mesh), mesh, tol,
                         label=f"adjoint {A.name} eps={eps:g}")


@dataclass
class DualityPairing:
    """Two evaluations of int v . (H - mean H)"""
    direct: float
    via_form: float

    @property
    def relative_gap(self) -> float:
        return abs(self.direct - self.via_form) / max(abs(self.direct), 1e-300)

    def to_dict(self) -> Dict[str, Any]:
        return {"direct": self.direct, "via_form": self.via_form,
                "relative_gap": self.relative_gap}


def duality_pairing(adjoint_flow: FlowField, v: GridFunction, A: CoefficientField, eps: float,
                    H: Callable[[np.ndarray], np.ndarray], mesh: DomainMesh) -> DualityPairing:
    """int v.(H - mean H) directly and as a(v, phi) - (sigma, div v)"""
    load = assemble_load(adjoint_data(H, mesh), mesh)
    K = stiffness_matrix(mesh, coefficient_at_quadrature(OscillatingCoefficient(A, eps), mesh))
    B = divergence_matrix(mesh)
    phi, sigma = adjoint_flow.u.vector, adjoint_flow.p.vector
    direct = float(load.velocity @ v.vector)
    via_form = float(phi @ (K @ v.vector) - sigma @ (B @ v.vector))
    return DualityPairing(direct=direct, via_form=via_form)


def energy_norm(flow: FlowField) -> float:
    """||u||_H1 + ||p - mean p||_L2"""
    return h1_norm(flow.u) + l2_norm(subtract_mean(flow.p))
