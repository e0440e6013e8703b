"""
Problem-data generators: manufactured solutions, the default study data and bump forcings
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import sympy as sp

from ..core.errors import AnalyticGradientError, ConfigError
from ..core.mesh import DomainMesh
from ..core.norms import integrate
from ..core.assembly import boundary_load
from ..models.coefficient import CoefficientField
from ..models.fields import ProblemData

logger = logging.getLogger(__name__)

X1, X2 = sp.symbols("x1 x2", real=True)
COORDS = (X1, X2)


def parse_expression(text, name: str = "expression") -> sp.Expr:
    """Parse a sympy expression in x1, x2"""
    try:
        expr = sp.sympify(text, locals={"x1": X1, "x2": X2, "pi": sp.pi})
    except (sp.SympifyError, TypeError, SyntaxError) as e:
        raise ConfigError(f"cannot parse {name} '{text}': {e}", key=name)
    unknown = expr.free_symbols - set(COORDS)
    if unknown:
        raise ConfigError(f"{name} uses unknown symbols {sorted(map(str, unknown))}", key=name)
    return expr


def _lambdify(expr: sp.Expr) -> Callable[[np.ndarray], np.ndarray]:
    fn = sp.lambdify(COORDS, expr, modules="numpy")

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x[..., 0], x[..., 1]), dtype=float),
                               x.shape[:-1]).copy()
    return evaluate


@dataclass
class ExactSolution:
    """Symbolic (u*, p*) with lambdified values, gradients and Hessians"""
    u_exprs: List[sp.Expr]
    p_expr: sp.Expr

    def __post_init__(self):
        d = len(COORDS)
        if len(self.u_exprs) != d:
            raise ConfigError(f"velocity needs {d} components, got {len(self.u_exprs)}", key="u")
        self._u = [_lambdify(e) for e in self.u_exprs]
        self._du = [[_lambdify(sp.diff(e, xk)) for xk in COORDS] for e in self.u_exprs]
        self._ddu = [[[_lambdify(sp.diff(e, xk, xl)) for xl in COORDS] for xk in COORDS]
                     for e in self.u_exprs]
        self._p = _lambdify(self.p_expr)
        self._dp = [_lambdify(sp.diff(self.p_expr, xk)) for xk in COORDS]

    @classmethod
    def from_strings(cls, u: Sequence[str], p: str) -> "ExactSolution":
        return cls([parse_expression(s, "u") for s in u], parse_expression(p, "p"))

    def u(self, x):
        """(..., d)"""
        return np.stack([f(x) for f in self._u], axis=-1)

    def grad_u(self, x):
        """[..., c, k] = d u^c / dx_k"""
        return np.stack([np.stack([f(x) for f in row], axis=-1) for row in self._du], axis=-2)

    def hess_u(self, x):
        """[..., c, k, l]"""
        return np.stack([
            np.stack([np.stack([f(x) for f in col], axis=-1) for col in row], axis=-2)
            for row in self._ddu
        ], axis=-3)

    def p(self, x):
        return self._p(x)

    def grad_p(self, x):
        return np.stack([f(x) for f in self._dp], axis=-1)

    def div_u(self, x):
        return np.einsum('...cc->...', self.grad_u(x))


def manufactured_problem(A: CoefficientField, eps: float, mesh: DomainMesh,
                         u_exprs: Sequence[str], p_expr: str) -> ProblemData:
    """
    Data for which (u*, p*) solves the oscillating Neumann problem:
    F = -div(A(x/eps) grad u*) + grad p*, g = div u*, f = A grad u* n - p* n.
    The quadrature defect of the compatibility condition on this mesh is removed from F.
    """
    if not A.has_analytic_gradient:
        raise AnalyticGradientError(
            f"manufactured data need an analytic gradient; family '{A.name}' has none",
            key="family",
        )
    exact = ExactSolution.from_strings(u_exprs, p_expr)

    def conormal(x, n):
        a = A.eval(np.asarray(x) / eps)
        flux = np.einsum('...ijab,...bj->...ai', a, exact.grad_u(x))
        return np.einsum('...ai,i->...a', flux, n) - exact.p(x)[..., None] * n

    def force(x):
        y = np.asarray(x) / eps
        a = A.eval(y)
        da = A.analytic_gradient(y)
        du = exact.grad_u(x)
        out = -(np.einsum('...iijab,...bj->...a', da, du) / eps
                + np.einsum('...ijab,...bij->...a', a, exact.hess_u(x)))
        return out + exact.grad_p(x)

    X = mesh.quadrature_points
    _, traction_total, _ = boundary_load(mesh, conormal)
    defect = (integrate(mesh, force(X)) + traction_total) / mesh.volume
    logger.info("Manufactured data on m=%d: quadrature compatibility defect %.3e",
                mesh.m, float(np.abs(defect).max()))

    return ProblemData(
        F=lambda x: force(x) - defect,
        g=exact.div_u,
        f=conormal,
        label=f"manufactured {A.name} eps={eps:g}",
    )


def default_problem(mesh: DomainMesh) -> ProblemData:
    """Smooth body force, g = 0 and the constant traction that balances it on this mesh"""
    def force(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([np.sin(np.pi * x1) * np.cos(np.pi * x2) + x2,
                         -np.cos(np.pi * x1) * np.sin(np.pi * x2) + x1 ** 2], axis=-1)

    traction = -integrate(mesh, force(mesh.quadrature_points)) / mesh.boundary_area
    return ProblemData(
        F=force,
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        f=lambda x, n: np.broadcast_to(traction, np.shape(x)).copy(),
        label="default",
    )


def bump_field(center: Sequence[float] = (0.5, 0.5), width: float = 0.2,
               direction: Sequence[float] = (1.0, -0.5)) -> Callable[[np.ndarray], np.ndarray]:
    """H(x) = exp(-|x - center|^2 / width^2) * direction"""
    if width <= 0.0:
        raise ConfigError(f"bump width must be positive, got {width}", key="data_spec.width")
    c = np.asarray(center, dtype=float)
    e = np.asarray(direction, dtype=float)

    def H(x):
        r2 = ((np.asarray(x) - c) ** 2).sum(axis=-1)
        return np.exp(-r2 / width ** 2)[..., None] * e
    return H


def bump_problem(mesh: DomainMesh, center: Sequence[float] = (0.5, 0.5),
                 width: float = 0.2) -> ProblemData:
    """Mean-free bump forcing with g = 0, f = 0"""
    H = bump_field(center, width)
    H_mean = integrate(mesh, H(mesh.quadrature_points)) / mesh.volume
    return ProblemData(
        F=lambda x: H(x) - H_mean,
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        f=lambda x, n: np.zeros(np.shape(x)),
        label="bump",
    )


def flux_test_field(entries: Optional[Sequence[Sequence[str]]], dim: int = 2
                    ) -> Callable[[np.ndarray], np.ndarray]:
    """Psi[..., alpha, i] from a d x d list of expressions; None gives Psi = 0"""
    if entries is None:
        return lambda x: np.zeros(np.shape(x)[:-1] + (dim, dim))
    if len(entries) != dim or any(len(row) != dim for row in entries):
        raise ConfigError(f"flux_field must be a {dim}x{dim} list", key="flux_field")
    fns = [[_lambdify(parse_expression(s, "flux_field")) for s in row] for row in entries]
    return lambda x: np.stack([np.stack([f(x) for f in row], axis=-1) for row in fns], axis=-2)
