"""
Sparse assembly of Q2-Q1 operators and factorized saddle-point solves
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import IndefiniteSystemError, SolverError
from .mesh import DomainMesh, StructuredMesh, tensor_basis

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------- #
# Scatter helpers
# ---------------------------------------------------------------------- #
def scatter_matrix(local: np.ndarray, row_dofs: np.ndarray, col_dofs: np.ndarray,
                   shape: Tuple[int, int]) -> sparse.csr_matrix:
    """Sum element matrices local (E, r, c) into a global sparse matrix"""
    local = np.broadcast_to(local, (row_dofs.shape[0], row_dofs.shape[1], col_dofs.shape[1]))
    rows = np.broadcast_to(row_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(col_dofs[:, None, :], local.shape)
    return sparse.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def scatter_vector(local: np.ndarray, dofs: np.ndarray, size: int) -> np.ndarray:
    """Sum element vectors local (E, r) into a global vector"""
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=size)


def vector_dofs(mesh: StructuredMesh, ncomp: int) -> np.ndarray:
    """Component-blocked dofs (E, ncomp * nloc) of a Q2 vector field"""
    dofs = mesh.element_dofs(2)
    n2 = mesh.n_nodes(2)
    blocked = np.arange(ncomp)[None, :, None] * n2 + dofs[:, None, :]
    return blocked.reshape(dofs.shape[0], -1)


def _grads(mesh: StructuredMesh, order: int = 2) -> np.ndarray:
    return mesh.reference(order).grads / mesh.h


# ---------------------------------------------------------------------- #
# Bilinear forms
# ---------------------------------------------------------------------- #
def stiffness_matrix(mesh: StructuredMesh, coeff: np.ndarray) -> sparse.csr_matrix:
    """
    Vector stiffness a(u, v) = int a_ij^ab d_j u^b d_i v^a.

    Args:
        coeff: (d, d, d, d) constant or (E, Q, d, d, d, d) at Gauss points
    """
    d = mesh.dim
    G = _grads(mesh)
    w = mesh.quadrature_weights
    nloc = G.shape[1]
    # pair[q, i, j, k, l] = w_q dphi_k/dx_i dphi_l/dx_j
    pair = np.einsum('q,qki,qlj->qijkl', w, G, G)
    if coeff.ndim == 4:
        local = np.einsum('ijab,qijkl->akbl', coeff, pair).reshape(1, d * nloc, d * nloc)
    else:
        local = np.einsum('eqijab,qijkl->eakbl', coeff, pair, optimize=True)
        local = local.reshape(coeff.shape[0], d * nloc, d * nloc)
    vd = vector_dofs(mesh, d)
    size = d * mesh.n_nodes(2)
    return scatter_matrix(local, vd, vd, (size, size))


def divergence_matrix(mesh: StructuredMesh) -> sparse.csr_matrix:
    """B[m, (b, l)] = int psi_m d_b phi_l"""
    d = mesh.dim
    psi = mesh.reference(1).values
    G = _grads(mesh)
    local = np.einsum('q,qm,qlb->mbl', mesh.quadrature_weights, psi, G)
    local = local.reshape(1, psi.shape[1], -1)
    return scatter_matrix(local, mesh.element_dofs(1), vector_dofs(mesh, d),
                          (mesh.n_nodes(1), d * mesh.n_nodes(2)))


def mass_matrix(mesh: StructuredMesh, row_order: int = 2, col_order: int = 2) -> sparse.csr_matrix:
    phi_r = mesh.reference(row_order).values
    phi_c = mesh.reference(col_order).values
    local = np.einsum('q,qk,ql->kl', mesh.quadrature_weights, phi_r, phi_c)[None]
    return scatter_matrix(local, mesh.element_dofs(row_order), mesh.element_dofs(col_order),
                          (mesh.n_nodes(row_order), mesh.n_nodes(col_order)))


def laplace_matrix(mesh: StructuredMesh) -> sparse.csr_matrix:
    """Scalar Q2 stiffness int grad phi_k . grad phi_l"""
    G = _grads(mesh)
    local = np.einsum('q,qki,qli->kl', mesh.quadrature_weights, G, G)[None]
    dofs = mesh.element_dofs(2)
    n2 = mesh.n_nodes(2)
    return scatter_matrix(local, dofs, dofs, (n2, n2))


def mean_rows(mesh: StructuredMesh, order: int, ncomp: int) -> sparse.csr_matrix:
    """Rows C[a, (a, node)] = int phi_node, one per component"""
    phi = mesh.reference(order).values
    local = np.broadcast_to(mesh.quadrature_weights @ phi, mesh.element_dofs(order).shape)
    n = mesh.n_nodes(order)
    ones = scatter_vector(local, mesh.element_dofs(order), n)
    return sparse.kron(sparse.eye(ncomp), sparse.csr_matrix(ones[None, :])).tocsr()


# ---------------------------------------------------------------------- #
# Linear forms
# ---------------------------------------------------------------------- #
def load_vector(mesh: StructuredMesh, values: np.ndarray, order: int = 2) -> np.ndarray:
    """int F . phi for Gauss-point values (E, Q, ncomp); component-blocked"""
    phi = mesh.reference(order).values
    ncomp = values.shape[2]
    local = np.einsum('q,qk,eqc->eck', mesh.quadrature_weights, phi, values)
    n = mesh.n_nodes(order)
    dofs = mesh.element_dofs(order)
    return np.concatenate([scatter_vector(local[:, c], dofs, n) for c in range(ncomp)])


def gradient_load(mesh: StructuredMesh, values: np.ndarray) -> np.ndarray:
    """int G_ai d_i phi^a for Gauss-point values (E, Q, ncomp, d); component-blocked"""
    G = _grads(mesh)
    ncomp = values.shape[2]
    local = np.einsum('q,qki,eqci->eck', mesh.quadrature_weights, G, values, optimize=True)
    n = mesh.n_nodes(2)
    dofs = mesh.element_dofs(2)
    return np.concatenate([scatter_vector(local[:, c], dofs, n) for c in range(ncomp)])


def boundary_load(mesh: DomainMesh,
                  traction: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    int_{boundary} f . phi over all boundary facets.

    Returns:
        (load vector, integral of f, L2 norm of f on the boundary)
    """
    d = mesh.dim
    n2 = mesh.n_nodes(2)
    dofs = mesh.element_dofs(2)
    out = np.zeros(d * n2)
    total = np.zeros(d)
    sq = 0.0
    for face in mesh.boundary_facets:
        phi = tensor_basis(2, face.ref_points, 0)
        vals = np.asarray(traction(face.points, face.normal), dtype=float)
        vals = np.broadcast_to(vals, face.points.shape)
        local = np.einsum('q,qk,fqc->fck', face.weights, phi, vals)
        for c in range(d):
            out[c * n2:(c + 1) * n2] += scatter_vector(local[:, c], dofs[face.elements], n2)
        total += np.einsum('q,fqc->c', face.weights, vals)
        sq += float(np.einsum('q,fqc->', face.weights, vals ** 2))
    return out, total, float(np.sqrt(sq))


# ---------------------------------------------------------------------- #
# Factorized solves
# ---------------------------------------------------------------------- #
@dataclass
class FactorizedSystem:
    """Sparse LU factorization of an assembled system, reused for many right-hand sides"""
    matrix: sparse.csr_matrix
    lu: object
    label: str
    norm_inf: float

    def solve(self, rhs: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, float]:
        """
        Solve and check the normwise backward error of every column.

        Returns:
            (solution, worst relative residual)
        """
        x = self.lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise IndefiniteSystemError(f"{self.label}: non-finite solution")
        residual = relative_residual(self.matrix, x, rhs, self.norm_inf)
        if residual > tol:
            raise SolverError(
                f"{self.label}: relative residual {residual:.3e} exceeds tol {tol:.1e}"
            )
        logger.info("%s solve: relative residual %.3e", self.label, residual)
        return x, residual


def relative_residual(matrix, x: np.ndarray, rhs: np.ndarray, norm_inf: float) -> float:
    r = rhs - matrix @ x
    axis = 0
    num = np.abs(r).max(axis=axis)
    den = norm_inf * np.abs(x).max(axis=axis) + np.abs(rhs).max(axis=axis)
    den = np.where(den > 0.0, den, 1.0)
    return float(np.max(num / den))


def factorize(matrix: sparse.spmatrix, label: str) -> FactorizedSystem:
    start_time = time.time()
    matrix = sparse.csr_matrix(matrix)
    try:
        lu = splu(matrix.tocsc())
    except RuntimeError as e:
        raise IndefiniteSystemError(f"{label}: factorization failed ({e})")
    norm_inf = float(abs(matrix).sum(axis=1).max())
    logger.info("%s: factorized n=%d nnz=%d in %.2fs",
                label, matrix.shape[0], matrix.nnz, time.time() - start_time)
    return FactorizedSystem(matrix=matrix, lu=lu, label=label, norm_inf=norm_inf)


def stokes_kkt(stiffness: sparse.spmatrix, div: sparse.spmatrix, vel_mean: sparse.spmatrix,
               pressure_mean: Optional[sparse.spmatrix] = None) -> sparse.csr_matrix:
    """
    [K, -B^T, C^T, (0)]
    [-B, 0,   0,   (c)]
    [C,  0,   0,   (0)]
    [(0), c^T, 0,  (0)]   last row/column only with a pressure-mean multiplier
    """
    if pressure_mean is None:
        return sparse.bmat([
            [stiffness, -div.T, vel_mean.T],
            [-div, None, None],
            [vel_mean, None, None],
        ], format='csr')
    return sparse.bmat([
        [stiffness, -div.T, vel_mean.T, None],
        [-div, None, None, pressure_mean.T],
        [vel_mean, None, None, None],
        [None, pressure_mean, None, None],
    ], format='csr')


def poisson_kkt(laplace: sparse.spmatrix, mean: sparse.spmatrix) -> sparse.csr_matrix:
    """[L, c^T; c, 0] for a periodic scalar Poisson problem with a mean multiplier"""
    return sparse.bmat([[laplace, mean.T], [mean, None]], format='csr')
