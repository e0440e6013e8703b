"""
Slope fitting, boundary-layer diagnostics and manufactured-solution convergence studies
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .mesh import DomainMesh
from .neumann import OscillatingCoefficient, solve_neumann
from .norms import integrate, quadrature_l2, strip_mask
from ..models.coefficient import CoefficientField
from ..models.fields import FlowField
from ..tools.manufactured import ExactSolution, manufactured_problem

logger = logging.getLogger(__name__)

MIN_POINTS = 3


@dataclass
class SlopeFit:
    """Least-squares line through (log x, log err)"""
    slope: float
    intercept: float
    r2: float
    n_points: int

    def to_dict(self) -> Dict[str, Any]:
        return {"slope": self.slope, "intercept": self.intercept,
                "r2": self.r2, "n_points": self.n_points}


def fit_slope(points: Sequence[Tuple[float, float]]) -> SlopeFit:
    """Ordinary least squares on (log eps, log err)"""
    if len(points) < MIN_POINTS:
        raise InsufficientDataError(
            f"slope fit needs at least {MIN_POINTS} points, got {len(points)}", key="eps_list"
        )
    x, err = np.asarray(points, dtype=float).T
    if np.any(err <= 0.0) or np.any(x <= 0.0):
        raise ConfigError("slope fit needs positive eps and error values", key="err")
    lx, ly = np.log(x), np.log(err)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return SlopeFit(slope=float(slope), intercept=float(intercept), r2=r2, n_points=len(x))


# ---------------------------------------------------------------------- #
# Boundary layers
# ---------------------------------------------------------------------- #
@dataclass
class BoundaryLayerProfile:
    """Gradient mass in the 2 eps strip, scaled by sqrt(eps)"""
    eps: float
    strip_grad: float
    ratio: float
    strip_grad_diff: Optional[float] = None
    ratio_diff: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def boundary_layer_profile(ue: FlowField, u0: Optional[FlowField], eps: float,
                           mesh: DomainMesh) -> BoundaryLayerProfile:
    """strip_norm(grad u, 2 eps) / sqrt(eps), also for u - u0 when u0 is given"""
    r = min(2.0 * eps, mesh.diameter)
    mask = strip_mask(mesh, r)
    grad = ue.u.at_quadrature(1)
    value = quadrature_l2(mesh, grad, mask)
    profile = BoundaryLayerProfile(eps=eps, strip_grad=value, ratio=value / np.sqrt(eps))
    if u0 is not None:
        diff = quadrature_l2(mesh, grad - u0.u.at_quadrature(1), mask)
        profile.strip_grad_diff = diff
        profile.ratio_diff = diff / np.sqrt(eps)
    return profile


# ---------------------------------------------------------------------- #
# Manufactured solutions
# ---------------------------------------------------------------------- #
@dataclass
class MmsRow:
    m: int
    h: float
    l2_u: float
    h1_u: float
    l2_p: float
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class MmsReport:
    """Discrete errors against a manufactured solution under refinement"""
    coefficient: str
    rows: List[MmsRow] = field(default_factory=list)
    orders: Dict[str, SlopeFit] = field(default_factory=dict)
    pairwise: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coefficient": self.coefficient,
            "rows": [r.to_dict() for r in self.rows],
            "orders": {k: v.to_dict() for k, v in self.orders.items()},
            "pairwise": self.pairwise,
        }


def solution_errors(flow: FlowField, exact: ExactSolution) -> Dict[str, float]:
    """L2 / H1-seminorm velocity errors and L2 mean-free pressure error"""
    mesh = flow.mesh
    X = mesh.quadrature_points
    u_star = exact.u(X)
    u_star = u_star - integrate(mesh, u_star) / mesh.volume
    p_h = flow.p.at_quadrature()[..., 0]
    p_h = p_h - integrate(mesh, p_h) / mesh.volume
    p_star = exact.p(X)
    p_star = p_star - integrate(mesh, p_star) / mesh.volume
    return {
        "l2_u": quadrature_l2(mesh, flow.u.at_quadrature() - u_star),
        "h1_u": quadrature_l2(mesh, flow.u.at_quadrature(1) - exact.grad_u(X)),
        "l2_p": quadrature_l2(mesh, p_h - p_star),
    }


def mms_study(A: CoefficientField, m_list: Sequence[int], u_exprs: Sequence[str], p_expr: str,
              eps: float = 1.0, tol: float = 1e-10) -> MmsReport:
    """Solve the manufactured problem on each m and fit convergence orders in h"""
    exact = ExactSolution.from_strings(u_exprs, p_expr)
    report = MmsReport(coefficient=A.name)
    for m in sorted(m_list):
        mesh = DomainMesh(n=m)
        data = manufactured_problem(A, eps, mesh, u_exprs, p_expr)
        flow = solve_neumann(OscillatingCoefficient(A, eps), data, mesh, tol, label=f"mms m={m}")
        errs = solution_errors(flow, exact)
        report.rows.append(MmsRow(m=m, h=mesh.h, residual=flow.residual, **errs))
        logger.info("MMS m=%d: |u|_L2 %.3e |u|_H1 %.3e |p|_L2 %.3e",
                    m, errs["l2_u"], errs["h1_u"], errs["l2_p"])

    for col in ("l2_u", "h1_u", "l2_p"):
        errs = [getattr(r, col) for r in report.rows]
        hs = [r.h for r in report.rows]
        report.pairwise[col] = [
            float(np.log(errs[k] / errs[k + 1]) / np.log(hs[k] / hs[k + 1]))
            for k in range(len(errs) - 1) if errs[k] > 0.0 and errs[k + 1] > 0.0
        ]
        if len(errs) >= MIN_POINTS and min(errs) > 0.0:
            report.orders[col] = fit_slope(list(zip(hs, errs)))
    return report
