"""
Periodic cell problems: correctors, effective tensor, flux discrepancy and dual correctors
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import (
    divergence_matrix, factorize, gradient_load, laplace_matrix, load_vector,
    mass_matrix, mean_rows, poisson_kkt, stiffness_matrix, stokes_kkt,
)
from .errors import CompatibilityError
from .mesh import CellGrid
from .norms import integrate, quadrature_l2
from ..models.coefficient import CoefficientField, adjoint, swap_pairs, tensor_matrix
from ..models.fields import GridFunction, SpaceTag

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------- #
# Result types
# ---------------------------------------------------------------------- #
@dataclass
class Corrector:
    """
    Cell correctors (chi_j^b, pi_j^b).

    chi[j, b, c, node] is component c of chi_j^b; pi[j, b, node];
    grad_chi[e, q, j, b, c, k] = d chi_j^{cb} / dy_k at Gauss points.
    The full pressure is the Q1 part pi plus the coefficient's pressure
    lift, when it has one.
    """
    grid: CellGrid
    chi: np.ndarray
    pi: np.ndarray
    grad_chi: np.ndarray
    multipliers: np.ndarray
    residual: float
    coefficient: str = ""
    lift: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def chi_field(self, j: int, beta: int) -> GridFunction:
        return GridFunction(SpaceTag.CELL_VELOCITY_Q2, self.chi[j, beta], self.grid)

    def pi_lift(self, y: np.ndarray) -> np.ndarray:
        """Lifted pressure part [..., j, b] at cell points, zero without a lift"""
        d = self.grid.dim
        y = np.asarray(y, dtype=float)
        if self.lift is None:
            return np.zeros(y.shape[:-1] + (d, d))
        return self.lift(y)

    def pi_quadrature(self) -> np.ndarray:
        """Full pressure pi[e, q, j, b] at Gauss points"""
        g = self.grid
        d = g.dim
        E, Q = g.quadrature_points.shape[:2]
        pi_h = g.evaluate(1, self.pi.reshape(d * d, -1), 0).reshape(E, Q, d, d)
        return pi_h + self.pi_lift(g.quadrature_points)

    def pi_field(self, j: int, beta: int) -> GridFunction:
        """Q1 part of pi_j^b"""
        return GridFunction(SpaceTag.CELL_PRESSURE_Q1, self.pi[j, beta], self.grid)

    def norms(self) -> Dict[str, float]:
        d = self.grid.dim
        chi_l2 = np.sqrt(sum(quadrature_l2(self.grid, self.grid.evaluate(2, self.chi[j, b])) ** 2
                             for j in range(d) for b in range(d)))
        return {"chi_l2": float(chi_l2), "pi_l2": quadrature_l2(self.grid, self.pi_quadrature()),
                "grad_chi_l2": quadrature_l2(self.grid, self.grad_chi)}


@dataclass
class EffectiveTensor:
    """Constant homogenized tensor a_hat[i, j, alpha, beta]"""
    a_hat: np.ndarray

    @property
    def dim(self) -> int:
        return self.a_hat.shape[0]

    def adjoint(self) -> "EffectiveTensor":
        return EffectiveTensor(swap_pairs(self.a_hat))

    def ellipticity_floor(self, samples: int = 1000, seed: int = 0) -> float:
        """Smallest sampled Rayleigh quotient over unit-norm matrices xi"""
        rng = np.random.default_rng(seed)
        d = self.dim
        xi = rng.standard_normal((samples, d, d))
        xi /= np.linalg.norm(xi.reshape(samples, -1), axis=1)[:, None, None]
        return float(np.einsum('ijab,pia,pjb->p', self.a_hat, xi, xi).min())

    def symmetric_eigenvalues(self) -> np.ndarray:
        m = tensor_matrix(self.a_hat)
        return np.linalg.eigvalsh(0.5 * (m + m.T))

    def to_dict(self) -> Dict[str, Any]:
        return {"a_hat": self.a_hat.tolist(),
                "symmetric_eigenvalues": self.symmetric_eigenvalues().tolist()}


@dataclass
class BField:
    """b[e, q, i, j, alpha, beta] = corrected flux minus a_hat at Gauss points"""
    b: np.ndarray
    grid: CellGrid


@dataclass
class DualCorrector:
    """
    Dual correctors at Gauss points with their Poisson potentials.

    q[e, q, i, j, b]; phi[e, q, k, i, j, a, b]; R[j, b, node]; f[i, j, a, b, node].
    """
    grid: CellGrid
    q: np.ndarray
    phi: np.ndarray
    R: np.ndarray
    f: np.ndarray
    residual: float


@dataclass
class CellDiagnostics:
    """
    Report of the cell-level identities.

    decomposition_* and relation_* are L2 norms of the reconstructed fields at the
    Gauss points; their discrete H^-1 counterparts sit in extras as *_dual.
    """
    div_chi: float
    div_chi_pointwise: float
    mean_chi: float
    mean_pi: float
    mean_b: float
    mean_q: float
    mean_phi: float
    decomposition_residual: float
    decomposition_relative: float
    relation_residual: float
    relation_relative: float
    ellipticity_floor: float
    adjoint_symmetry: float
    phi_l2: float
    q_l2: float
    antisymmetry: float
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = {k: v for k, v in self.__dict__.items() if k != "extras"}
        out.update(self.extras)
        return out

    def failures(self, tolerances) -> list:
        """Names of gated quantities that exceed their thresholds"""
        checks = {
            "div_chi": self.div_chi <= tolerances.cell_identity,
            "mean_chi": self.mean_chi <= tolerances.cell_mean,
            "mean_pi": self.mean_pi <= tolerances.cell_mean,
            "mean_b": self.mean_b <= tolerances.cell_identity,
            "mean_q": self.mean_q <= tolerances.cell_mean,
            "mean_phi": self.mean_phi <= tolerances.cell_mean,
            "relation_residual": self.relation_relative <= tolerances.decomposition,
            "decomposition_residual": self.decomposition_relative <= tolerances.decomposition,
            "adjoint_symmetry": self.adjoint_symmetry <= tolerances.cell_identity,
            "ellipticity_floor": self.ellipticity_floor > 0.0,
            "antisymmetry": self.antisymmetry == 0.0,
        }
        return [name for name, ok in checks.items() if not ok]


# ---------------------------------------------------------------------- #
# Periodic scalar Poisson
# ---------------------------------------------------------------------- #
class PeriodicPoisson:
    """Mean-zero periodic Q2 Poisson solver, factorized once"""

    def __init__(self, grid: CellGrid, tol: float = 1e-10):
        self.grid = grid
        self.tol = tol
        self.laplace = laplace_matrix(grid)
        self.mean = mean_rows(grid, 2, 1)
        self.system = factorize(poisson_kkt(self.laplace, self.mean), "periodic Poisson")
        self.n = grid.n_nodes(2)

    def solve(self, rhs: np.ndarray):
        """Solve (grad z, grad v) + lam (1, v) = rhs(v), (z, 1) = 0 for columns of rhs (N, k)"""
        rhs = np.atleast_2d(rhs.T).T
        aug = np.vstack([rhs, np.zeros((1, rhs.shape[1]))])
        x, res = self.system.solve(aug, self.tol)
        return x[:self.n], x[self.n], res

    def dual_norm(self, functional: np.ndarray) -> np.ndarray:
        """Discrete H^-1 norm ||grad z|| of each column functional"""
        z, _, _ = self.solve(functional)
        return np.sqrt(np.maximum(np.einsum('nk,nk->k', z, self.laplace @ z), 0.0))


# ---------------------------------------------------------------------- #
# Operations
# ---------------------------------------------------------------------- #
def solve_cell(A: CoefficientField, g: CellGrid, tol: float = 1e-10) -> Corrector:
    """Solve the d^2 periodic Stokes cell problems with one factorization"""
    d = g.dim
    n2, n1 = g.n_nodes(2), g.n_nodes(1)
    nv = d * n2
    A_qp = A.eval(g.quadrature_points)
    kkt = stokes_kkt(stiffness_matrix(g, A_qp), divergence_matrix(g),
                     mean_rows(g, 2, d), mean_rows(g, 1, 1))
    system = factorize(kkt, f"cell problem ({A.name}, n={g.n})")

    # pi = pi_h + lift moves (lift, div v) to the right-hand side
    lift = A.pressure_lift(g.quadrature_points) if A.has_pressure_lift else None
    rhs = np.zeros((kkt.shape[0], d * d))
    for j in range(d):
        for beta in range(d):
            # forcing -int a_ij^ab d_i v^a, arranged as G[e, q, a, i]
            G = -np.transpose(A_qp[:, :, :, j, :, beta], (0, 1, 3, 2))
            if lift is not None:
                G = G + lift[:, :, j, beta, None, None] * np.eye(d)
                # int pi_h = -int lift, so the full pressure has zero mean
                rhs[-1, j * d + beta] = -integrate(g, lift[:, :, j, beta])
            rhs[:nv, j * d + beta] = gradient_load(g, G)

    x, residual = system.solve(rhs, tol)
    chi = x[:nv].T.reshape(d, d, d, n2)
    pi = x[nv:nv + n1].T.reshape(d, d, n1)
    multipliers = x[nv + n1:].T.reshape(d, d, -1)
    grad = g.evaluate(2, chi.reshape(d ** 3, n2), 1)
    grad_chi = grad.reshape(grad.shape[0], grad.shape[1], d, d, d, d)
    logger.info("Cell correctors for %s on n=%d: residual %.2e, max |multiplier| %.2e",
                A.name, g.n, residual, np.abs(multipliers).max())
    return Corrector(grid=g, chi=chi, pi=pi, grad_chi=grad_chi, multipliers=multipliers,
                     residual=residual, coefficient=A.name,
                     lift=A.pressure_lift if A.has_pressure_lift else None)


def corrected_flux(A: CoefficientField, c: Corrector) -> np.ndarray:
    """a_ij^ab + a_ik^ag d chi_j^{gb}/dy_k at Gauss points (E, Q, i, j, a, b)"""
    A_qp = A.eval(c.grid.quadrature_points)
    return A_qp + np.einsum('eqikag,eqjbgk->eqijab', A_qp, c.grad_chi, optimize=True)


def effective_tensor(A: CoefficientField, c: Corrector, g: CellGrid) -> EffectiveTensor:
    a_hat = integrate(g, corrected_flux(A, c)) / g.volume
    return EffectiveTensor(a_hat=a_hat)


def b_field(A: CoefficientField, c: Corrector, ahat: EffectiveTensor, g: CellGrid) -> BField:
    return BField(b=corrected_flux(A, c) - ahat.a_hat, grid=g)


def dual_correctors(bf: BField, c: Corrector, g: CellGrid, tol: float = 1e-10,
                    compat_tol: float = 1e-8, poisson: Optional[PeriodicPoisson] = None) -> DualCorrector:
    """
    Build (q, Phi) from two rounds of periodic Poisson solves:
    Delta R_j^b = pi_j^b, q_ij^b = d_i R_j^b;
    Delta f_ij^ab = b_ij^ab - d_a q_ij^b, Phi_kij^ab = d_k f_ij^ab - d_i f_kj^ab.
    """
    d = g.dim
    n2 = g.n_nodes(2)
    E, Q = g.quadrature_points.shape[:2]
    poisson = poisson or PeriodicPoisson(g, tol)

    # potentials R: (grad R, grad v) = -(pi, v)
    rhs_r = -load_vector(g, c.pi_quadrature().reshape(E, Q, d * d)).reshape(d * d, n2).T
    _check_compatible(rhs_r, compat_tol, "pi")
    R, lam_r, res_r = poisson.solve(rhs_r)
    grad_r = g.evaluate(2, R.T, 1).reshape(E, Q, d, d, d)       # [j, b, i]
    q = np.transpose(grad_r, (0, 1, 4, 2, 3))                   # [i, j, b]

    # potentials f: (grad f, grad v) = -(b, v) - (q_ij^b, d_a v)
    b = bf.b.reshape(E, Q, d ** 4)
    grad_data = np.einsum('eqijb,ka->eqijabk', q, np.eye(d)).reshape(E, Q, d ** 4, d)
    rhs_f = -(load_vector(g, b) + gradient_load(g, grad_data)).reshape(d ** 4, n2).T
    _check_compatible(rhs_f, compat_tol, "b")
    f, lam_f, res_f = poisson.solve(rhs_f)
    grad_f = g.evaluate(2, f.T, 1).reshape(E, Q, d, d, d, d, d)  # [i, j, a, b, k]
    M = np.moveaxis(grad_f, -1, 2)                              # [k, i, j, a, b]
    phi = M - np.swapaxes(M, 2, 3)

    logger.info("Dual correctors: Poisson residuals %.2e / %.2e, multipliers %.2e / %.2e",
                res_r, res_f, np.abs(lam_r).max(), np.abs(lam_f).max())
    return DualCorrector(grid=g, q=q, phi=phi, R=R.T.reshape(d, d, n2),
                         f=f.T.reshape(d, d, d, d, n2), residual=max(res_r, res_f))


def _check_compatible(rhs: np.ndarray, compat_tol: float, label: str):
    defect = np.abs(rhs.sum(axis=0))
    scale = np.abs(rhs).sum(axis=0)
    if np.any(defect > compat_tol * scale + 1e-13):
        raise CompatibilityError(
            f"mean of {label} is not zero: defect {defect.max():.3e} vs scale {scale.max():.3e}",
            key=label,
        )


def decomposition_functionals(bf: BField, dc: DualCorrector) -> np.ndarray:
    """Weak residuals r(v) = (b, v) + (Phi_k, d_k v) + (q, d_a v), one column per (i, j, a, b)"""
    g = bf.grid
    d = g.dim
    E, Q = g.quadrature_points.shape[:2]
    grad_data = (np.moveaxis(dc.phi, 2, -1)
                 + np.einsum('eqijb,ka->eqijabk', dc.q, np.eye(d)))
    grad_data = grad_data.reshape(E, Q, d ** 4, d)
    r = load_vector(g, bf.b.reshape(E, Q, d ** 4)) + gradient_load(g, grad_data)
    return r.reshape(d ** 4, -1).T


def relation_functionals(c: Corrector, dc: DualCorrector) -> np.ndarray:
    """Weak residuals r(v) = (pi, v) + (q_ij, d_i v), one column per (j, b)"""
    g = c.grid
    d = g.dim
    E, Q = g.quadrature_points.shape[:2]
    pi_qp = c.pi_quadrature().reshape(E, Q, d * d)
    grad_data = np.transpose(dc.q, (0, 1, 3, 4, 2)).reshape(E, Q, d * d, d)
    r = load_vector(g, pi_qp) + gradient_load(g, grad_data)
    return r.reshape(d * d, -1).T


def _project_q2(g: CellGrid, values: np.ndarray) -> np.ndarray:
    """L2 projection of Gauss-point values (E, Q, k) onto periodic Q2, nodal (k, N)"""
    k = values.shape[2]
    rhs = load_vector(g, values).reshape(k, -1).T
    return splu(mass_matrix(g, 2, 2).tocsc()).solve(rhs).T


def reconstruction_residuals(bf: BField, c: Corrector, dc: DualCorrector) -> Dict[str, np.ndarray]:
    """
    Pointwise residuals of the reconstructed fields at the Gauss points:
    decomposition b_ij^ab - d_k Phi_kij^ab - d_a q_ij^b and relation pi_j^b - d_i q_ij^b.

    Phi and q are gradients of Q2 potentials, so they are projected back onto Q2
    before they are differentiated.
    """
    g = bf.grid
    d = g.dim
    E, Q = g.quadrature_points.shape[:2]
    n_phi = d ** 5
    nodal = _project_q2(g, np.concatenate(
        [dc.phi.reshape(E, Q, n_phi), dc.q.reshape(E, Q, d ** 3)], axis=2))
    grads = g.evaluate(2, nodal, 1)
    dphi = grads[:, :, :n_phi].reshape(E, Q, d, d, d, d, d, d)    # [k, i, j, a, b, l]
    dq = grads[:, :, n_phi:].reshape(E, Q, d, d, d, d)            # [i, j, b, l]
    div_phi = np.einsum('eqkijabk->eqijab', dphi)
    grad_q = np.transpose(dq, (0, 1, 2, 3, 5, 4))                  # [i, j, a, b]
    return {
        "decomposition": bf.b - div_phi - grad_q,
        "relation": c.pi_quadrature() - np.einsum('eqijbi->eqjb', dq),
    }


def verify_cell_identities(A: CoefficientField, c: Corrector, ahat: EffectiveTensor,
                           bf: BField, dc: DualCorrector, g: CellGrid,
                           ahat_adjoint: Optional[EffectiveTensor] = None,
                           samples: int = 1000, seed: int = 0,
                           tol: float = 1e-10) -> CellDiagnostics:
    """Evaluate the corrector, dual-corrector and effective-tensor identities"""
    d = g.dim

    # discrete divergence: Q1 projection of div chi
    B = divergence_matrix(g)
    m1 = mass_matrix(g, 1, 1)
    m1_lu = splu(m1.tocsc())
    div_proj = []
    for j in range(d):
        for beta in range(d):
            dh = m1_lu.solve(B @ c.chi[j, beta].ravel())
            div_proj.append(np.sqrt(max(dh @ (m1 @ dh), 0.0)))
    div_point = np.einsum('eqjbcc->eqjb', c.grad_chi)

    recon = reconstruction_residuals(bf, c, dc)
    decomp = quadrature_l2(g, recon["decomposition"])
    relation = quadrature_l2(g, recon["relation"])
    b_l2 = quadrature_l2(g, bf.b)
    pi_l2 = quadrature_l2(g, c.pi_quadrature())

    poisson = PeriodicPoisson(g, tol)
    decomp_dual = float(np.linalg.norm(poisson.dual_norm(decomposition_functionals(bf, dc))))
    relation_dual = float(np.linalg.norm(poisson.dual_norm(relation_functionals(c, dc))))

    if ahat_adjoint is None:
        A_star = adjoint(A)
        ahat_adjoint = effective_tensor(A_star, solve_cell(A_star, g, tol), g)
    adjoint_gap = float(np.abs(ahat_adjoint.a_hat - ahat.adjoint().a_hat).max())

    chi_mean = integrate(g, g.evaluate(2, c.chi.reshape(d ** 3, -1), 0)) / g.volume
    pi_mean = integrate(g, c.pi_quadrature()) / g.volume

    diag = CellDiagnostics(
        div_chi=float(max(div_proj)),
        div_chi_pointwise=quadrature_l2(g, div_point),
        mean_chi=float(np.abs(chi_mean).max()),
        mean_pi=float(np.abs(pi_mean).max()),
        mean_b=float(np.abs(integrate(g, bf.b)).max() / g.volume),
        mean_q=float(np.abs(integrate(g, dc.q)).max() / g.volume),
        mean_phi=float(np.abs(integrate(g, dc.phi)).max() / g.volume),
        decomposition_residual=decomp,
        decomposition_relative=decomp / max(b_l2, 1e-8),
        relation_residual=relation,
        relation_relative=relation / max(pi_l2, 1e-8),
        ellipticity_floor=ahat.ellipticity_floor(samples, seed),
        adjoint_symmetry=adjoint_gap,
        phi_l2=quadrature_l2(g, dc.phi),
        q_l2=quadrature_l2(g, dc.q),
        antisymmetry=float(np.abs(dc.phi + np.swapaxes(dc.phi, 2, 3)).max()),
        extras={"n": g.n, "corrector_residual": c.residual, "b_l2": b_l2, "pi_l2": pi_l2,
                "decomposition_dual": decomp_dual, "relation_dual": relation_dual},
    )
    logger.info("Cell identities on n=%d: decomposition %.3e (dual %.3e), relation %.3e (dual %.3e), "
                "adjoint gap %.3e", g.n, decomp, decomp_dual, relation, relation_dual, adjoint_gap)
    return diag
