"""
Two-scale machinery: reflection extension, Steklov smoothing, eps-periodic sampling
and the residual fields of the first-order expansion.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import load_vector, mass_matrix
from .cell import Corrector
from .errors import GaugeError, MeshError
from .mesh import DomainMesh
from .norms import h2_surrogate, integrate, quadrature_l2, strip_mask
from ..models.fields import FlowField, GridFunction, QuadratureField, SpaceTag

logger = logging.getLogger(__name__)

C_EXT_BOUND = 16.0
GAUGE_TOL = 1e-10

_DOMAIN_TAGS = {
    SpaceTag.CELL_VELOCITY_Q2: SpaceTag.VELOCITY_Q2,
    SpaceTag.CELL_PRESSURE_Q1: SpaceTag.PRESSURE_Q1,
    SpaceTag.CELL_SCALAR_Q2: SpaceTag.SCALAR_Q2,
}


# ---------------------------------------------------------------------- #
# Extension
# ---------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class ExtendedField:
    """A domain field and its even reflection onto the padded mesh"""
    base: GridFunction
    padded: GridFunction
    pad_width: float
    c_ext: float

    @property
    def mesh(self) -> DomainMesh:
        return self.base.mesh

    @classmethod
    def from_function(cls, space_tag: SpaceTag, func, mesh: DomainMesh) -> "ExtendedField":
        """Interpolate a function given on the whole padded box (no reflection)"""
        base = GridFunction.interpolate(space_tag, func, mesh)
        padded = GridFunction.interpolate(space_tag, func, mesh.padded())
        base_h2 = h2_surrogate(base)
        return cls(base=base, padded=padded, pad_width=mesh.pad_width,
                   c_ext=h2_surrogate(padded) / base_h2 if base_h2 > 0.0 else 0.0)


def _reflect(idx: np.ndarray, last: int) -> np.ndarray:
    idx = np.where(idx < 0, -idx, idx)
    return np.where(idx > last, 2 * last - idx, idx)


def extend(u0: GridFunction, mesh: Optional[DomainMesh] = None,
           eps_max: float = 0.0) -> ExtendedField:
    """Even reflection across each face of the square (corners by reflecting twice)"""
    mesh = mesh or u0.mesh
    if u0.mesh != mesh or not isinstance(mesh, DomainMesh):
        raise MeshError("extension needs a field on the given domain mesh", key="mesh")
    if mesh.pad < 1 or mesh.pad_width < eps_max * (1.0 - 1e-12):
        raise MeshError(
            f"pad width {mesh.pad_width:.4g} does not cover eps_max={eps_max:.4g}", key="pad"
        )
    order = u0.order
    padded_mesh = mesh.padded()
    idx = padded_mesh.node_multi_index(order) - order * mesh.pad
    source = mesh._flatten(_reflect(idx, order * mesh.n), order)
    padded = GridFunction(u0.space_tag, u0.values[:, source], padded_mesh)

    base_h2 = h2_surrogate(u0)
    c_ext = h2_surrogate(padded) / base_h2 if base_h2 > 0.0 else 0.0
    logger.info("Extension to pad width %.4g: C_ext = %.3f", mesh.pad_width, c_ext)
    if c_ext > C_EXT_BOUND:
        logger.warning("Extension constant %.3f exceeds %.1f", c_ext, C_EXT_BOUND)
    return ExtendedField(base=u0, padded=padded, pad_width=mesh.pad_width, c_ext=c_ext)


# ---------------------------------------------------------------------- #
# Steklov smoothing
# ---------------------------------------------------------------------- #
def _as_extended(u: Union[ExtendedField, GridFunction], eps: float) -> ExtendedField:
    if isinstance(u, ExtendedField):
        if u.pad_width < eps * (1.0 - 1e-12):
            raise MeshError(f"pad width {u.pad_width:.4g} < eps={eps:.4g}", key="pad")
        return u
    return extend(u, eps_max=eps)


def steklov_shifts(eps: float, h: float, dim: int) -> np.ndarray:
    """Midpoints z of a K^d subdivision of [0,1)^d with eps / K <= h"""
    K = max(1, int(np.ceil(eps / h - 1e-9)))
    t = (np.arange(K) + 0.5) / K
    grids = np.meshgrid(*[t] * dim, indexing='ij')
    return np.stack([g.ravel() for g in grids], axis=-1)


def steklov_at(u: Union[ExtendedField, GridFunction], eps: float, points: np.ndarray,
               deriv: int = 0) -> np.ndarray:
    """
    (S_eps D^deriv u)(x) = average over z in [0,1)^d of D^deriv u(x - eps z).

    Returns:
        (P, ncomp) for deriv 0, with a trailing (d,) per derivative order
    """
    ext = _as_extended(u, eps)
    mesh = ext.mesh
    points = np.asarray(points, dtype=float).reshape(-1, mesh.dim)
    shifts = steklov_shifts(eps, mesh.h, mesh.dim)
    total = None
    for z in shifts:
        vals = ext.padded.at_points(points - eps * z, deriv)
        total = vals if total is None else total + vals
    return total / len(shifts)


def steklov_quadrature(u: Union[ExtendedField, GridFunction], eps: float,
                       deriv: int = 0) -> np.ndarray:
    """S_eps D^deriv u at the Gauss points of the base mesh, shaped (E, Q, ...)"""
    ext = _as_extended(u, eps)
    X = ext.mesh.quadrature_points
    vals = steklov_at(ext, eps, X.reshape(-1, X.shape[-1]), deriv)
    return vals.reshape(X.shape[:2] + vals.shape[1:])


def steklov(u: Union[ExtendedField, GridFunction], eps: float) -> GridFunction:
    """Nodal interpolant of S_eps u on the base domain mesh"""
    ext = _as_extended(u, eps)
    base = ext.base
    nodes = base.mesh.node_coordinates(base.order)
    return base.with_values(steklov_at(ext, eps, nodes).T)


# ---------------------------------------------------------------------- #
# Periodic sampling
# ---------------------------------------------------------------------- #
def cell_points(X: np.ndarray, eps: float) -> np.ndarray:
    """frac(x / eps)"""
    return np.mod(np.asarray(X, dtype=float) / eps, 1.0)


def sample_periodic(f: GridFunction, eps: float, mesh: DomainMesh,
                    at: str = "nodes") -> Union[GridFunction, QuadratureField]:
    """f^eps(x) = f(frac(x / eps)) at the domain nodes or Gauss points"""
    if not f.space_tag.on_cell:
        raise MeshError("periodic sampling needs a cell field", key="mesh")
    if at == "quadrature":
        X = mesh.quadrature_points
        vals = f.at_points(cell_points(X, eps).reshape(-1, mesh.dim))
        return QuadratureField(vals.reshape(X.shape[:2] + vals.shape[1:]), mesh)
    tag = _DOMAIN_TAGS[f.space_tag]
    nodes = mesh.node_coordinates(tag.order)
    return GridFunction(tag, f.at_points(cell_points(nodes, eps)).T, mesh)


def periodic_product_bound(f: GridFunction, u: ExtendedField, eps: float) -> Dict[str, float]:
    """||f^eps S_eps u||_{L2(domain)} against ||f||_{L2(Y)} ||u||_{L2(padded)}"""
    mesh = u.mesh
    f_eps = sample_periodic(f, eps, mesh, at="quadrature").values
    su = steklov_quadrature(u, eps)
    lhs = quadrature_l2(mesh, f_eps[..., :, None] * su[..., None, :])
    f_cell = quadrature_l2(f.mesh, f.at_quadrature())
    u_pad = quadrature_l2(u.padded.mesh, u.padded.at_quadrature())
    return {"lhs": lhs, "rhs": f_cell * u_pad}


def steklov_error_ratio(u: Union[ExtendedField, GridFunction], eps: float) -> float:
    """||S_eps u - u|| / (eps ||grad u||) on the base domain"""
    ext = _as_extended(u, eps)
    mesh = ext.mesh
    diff = steklov_quadrature(ext, eps) - ext.base.at_quadrature()
    grad = quadrature_l2(mesh, ext.base.at_quadrature(1))
    return quadrature_l2(mesh, diff) / (eps * grad) if grad > 0.0 else 0.0


def boundary_layer_norm(f: GridFunction, u: Union[ExtendedField, GridFunction],
                        eps: float) -> Dict[str, float]:
    """(int over the 2 eps strip of |f^eps|^2 |S_eps u|^2)^(1/2) and its ratio to sqrt(eps)"""
    ext = _as_extended(u, eps)
    mesh = ext.mesh
    f_eps = sample_periodic(f, eps, mesh, at="quadrature").values
    su = steklov_quadrature(ext, eps)
    density = f_eps[..., :, None] * su[..., None, :]
    r = min(2.0 * eps, mesh.diameter)
    value = quadrature_l2(mesh, density, strip_mask(mesh, r))
    return {"eps": eps, "value": value, "ratio": value / np.sqrt(eps)}


# ---------------------------------------------------------------------- #
# Residual fields
# ---------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class ResidualFields:
    """
    Residuals of the first-order expansion at the domain Gauss points.

    v = u_eps - u_0 - eps chi^eps S_eps(grad u_0); p_res the mean-free pressure residual;
    contraction = eps chi_j^{ab,eps} S_eps(d_a d_j u_0^b); corrector_gradient the
    leading part (grad_y chi)^eps S_eps(grad u_0) of grad w.

    div_identity_weak is div v + contraction tested against the Q1 pressure space
    of the mesh, measured as the norm of its L2 projection. Both solves are weakly
    incompressible there, so what remains is the divergence of the cell corrector.
    """
    mesh: DomainMesh
    eps: float
    v: QuadratureField
    grad_v: QuadratureField
    p_res: QuadratureField
    div_v: QuadratureField
    contraction: QuadratureField
    corrector_gradient: QuadratureField
    div_identity_weak: float

    @property
    def l2_v(self) -> float:
        return quadrature_l2(self.mesh, self.v.values)

    @property
    def grad_v_l2(self) -> float:
        return quadrature_l2(self.mesh, self.grad_v.values)

    @property
    def h1_v(self) -> float:
        return float(np.hypot(self.l2_v, self.grad_v_l2))

    @property
    def l2_p(self) -> float:
        return quadrature_l2(self.mesh, self.p_res.values)

    @property
    def div_v_l2(self) -> float:
        return quadrature_l2(self.mesh, self.div_v.values)

    @property
    def div_identity_raw(self) -> float:
        """||div v + eps chi^eps S_eps(grad^2 u_0)|| at the Gauss points"""
        return quadrature_l2(self.mesh, self.div_v.values + self.contraction.values)

    @property
    def corrector_gradient_l2(self) -> float:
        return quadrature_l2(self.mesh, self.corrector_gradient.values)

    def norms(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "h1_v": self.h1_v,
            "grad_v_l2": self.grad_v_l2,
            "l2_p": self.l2_p,
            "div_v": self.div_v_l2,
            "div_identity_raw": self.div_identity_raw,
            "div_identity_weak": self.div_identity_weak,
            "corrector_gradient_l2": self.corrector_gradient_l2,
        }


def weak_q1_norm(mesh: DomainMesh, values: np.ndarray) -> float:
    """||P_1 f|| for scalar Gauss-point values f (E, Q), P_1 the L2 projection onto Q1"""
    r = load_vector(mesh, values[..., None], order=1)
    z = splu(mass_matrix(mesh, 1, 1).tocsc()).solve(r)
    return float(np.sqrt(max(z @ r, 0.0)))


def _check_gauge(flow: FlowField, name: str):
    u_mean = integrate(flow.mesh, flow.u.at_quadrature()) / flow.mesh.volume
    if np.abs(u_mean).max() > GAUGE_TOL:
        raise GaugeError(
            f"{name} velocity has mean {np.abs(u_mean).max():.3e}; apply the gauge first",
            key=name,
        )


def assemble_residuals(ue: FlowField, u0: FlowField, c: Corrector, eps: float,
                       mesh: DomainMesh, u0_ext: Optional[ExtendedField] = None) -> ResidualFields:
    """Velocity and pressure residuals of the two-scale expansion on the shared mesh"""
    if ue.mesh != mesh or u0.mesh != mesh:
        raise MeshError("oscillating and homogenized solutions must share the mesh", key="mesh")
    _check_gauge(ue, "u_eps")
    _check_gauge(u0, "u_0")
    d = mesh.dim
    E, Q = mesh.quadrature_points.shape[:2]
    cell = c.grid

    ext = u0_ext if u0_ext is not None else extend(u0.u, mesh, eps)
    S1 = steklov_quadrature(ext, eps, deriv=1)         # [e, q, b, j]
    S2 = steklov_quadrature(ext, eps, deriv=2)         # [e, q, b, j, k]

    Y = cell_points(mesh.quadrature_points, eps).reshape(-1, d)
    chi = cell.evaluate_points(2, c.chi.reshape(d ** 3, -1), Y, 0).reshape(E, Q, d, d, d)
    dchi = cell.evaluate_points(2, c.chi.reshape(d ** 3, -1), Y, 1).reshape(E, Q, d, d, d, d)
    pi = (cell.evaluate_points(1, c.pi.reshape(d * d, -1), Y, 0).reshape(E, Q, d, d)
          + c.pi_lift(Y).reshape(E, Q, d, d))

    # chi[e, q, j, b, g]; dchi[e, q, j, b, g, k] (derivative in y)
    w = eps * np.einsum('eqjbg,eqbj->eqg', chi, S1)
    grad_lead = np.einsum('eqjbgk,eqbj->eqgk', dchi, S1)
    grad_w = (grad_lead
              + eps * np.einsum('eqjbg,eqbjk->eqgk', chi, S2))

    u_diff = ue.u.at_quadrature() - u0.u.at_quadrature()
    grad_diff = ue.u.at_quadrature(1) - u0.u.at_quadrature(1)
    v = u_diff - w
    grad_v = grad_diff - grad_w
    div_v = np.einsum('eqgg->eq', grad_v)
    contraction = eps * np.einsum('eqjbg,eqbjg->eq', chi, S2)
    weak = weak_q1_norm(mesh, div_v + contraction)

    p_corr = np.einsum('eqjb,eqbj->eq', pi, S1)
    p_corr -= integrate(mesh, p_corr) / mesh.volume
    pe = ue.p.at_quadrature()[..., 0]
    p0 = u0.p.at_quadrature()[..., 0]
    pe = pe - integrate(mesh, pe) / mesh.volume
    p0 = p0 - integrate(mesh, p0) / mesh.volume

    res = ResidualFields(
        mesh=mesh, eps=eps,
        v=QuadratureField(v, mesh),
        grad_v=QuadratureField(grad_v, mesh),
        p_res=QuadratureField(pe - p0 - p_corr, mesh),
        div_v=QuadratureField(div_v, mesh),
        contraction=QuadratureField(contraction, mesh),
        corrector_gradient=QuadratureField(grad_lead, mesh),
        div_identity_weak=weak,
    )
    logger.info("Residuals at eps=%g: |v|_H1 %.3e, |p_res| %.3e, div identity %.2e weak / %.2e raw",
                eps, res.h1_v, res.l2_p, weak, res.div_identity_raw)
    return res
