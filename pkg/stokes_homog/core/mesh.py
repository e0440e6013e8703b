"""
Structured tensor-product meshes: the periodic unit cell and the bounded square

Elements are axis-aligned cubes of side h. Continuous Q2 (velocity) and Q1
(pressure) spaces share the element grid; nodes are numbered with the first
axis fastest, and local element nodes likewise (k = a + 3b for Q2 in 2-D).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import List, Tuple

import numpy as np

from .errors import MeshError

logger = logging.getLogger(__name__)

# 3-point Gauss-Legendre rule mapped to [0, 1]
GAUSS_POINTS_1D = 0.5 + 0.5 * np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
GAUSS_WEIGHTS_1D = np.array([5.0, 8.0, 5.0]) / 18.0


# ---------------------------------------------------------------------- #
# 1-D Lagrange bases on [0, 1]
# ---------------------------------------------------------------------- #
def lagrange_1d(order: int, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Values (deriv=0) or derivatives of the 1-D Lagrange basis, shape (len(t), order+1)"""
    t = np.asarray(t, dtype=float)
    one = np.ones_like(t)
    if order == 1:
        table = {
            0: [1.0 - t, t],
            1: [-one, one],
            2: [0.0 * one, 0.0 * one],
        }
    elif order == 2:
        table = {
            0: [2.0 * (t - 0.5) * (t - 1.0), -4.0 * t * (t - 1.0), 2.0 * t * (t - 0.5)],
            1: [4.0 * t - 3.0, -8.0 * t + 4.0, 4.0 * t - 1.0],
            2: [4.0 * one, -8.0 * one, 4.0 * one],
        }
    else:
        raise ValueError(f"Unsupported element order {order}")
    return np.stack(table[deriv], axis=-1)


def local_multi_indices(order: int, dim: int) -> np.ndarray:
    """Local node multi-indices (nloc, dim), first axis fastest"""
    return np.array([tuple(reversed(p)) for p in product(range(order + 1), repeat=dim)], dtype=int)


def tensor_basis(order: int, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    """
    Tensor-product basis on the reference cube [0,1]^d.

    Args:
        order: 1 or 2
        t: reference points (P, d)
        deriv: 0 values (P, nloc); 1 gradients (P, nloc, d); 2 hessians (P, nloc, d, d)
    """
    t = np.atleast_2d(np.asarray(t, dtype=float))
    npts, dim = t.shape
    idx = local_multi_indices(order, dim)
    tables = [[lagrange_1d(order, t[:, ax], k) for k in range(3)] for ax in range(dim)]

    def factor(ax, k):
        return tables[ax][k][:, idx[:, ax]]

    if deriv == 0:
        out = np.ones((npts, len(idx)))
        for ax in range(dim):
            out *= factor(ax, 0)
        return out
    if deriv == 1:
        out = np.ones((npts, len(idx), dim))
        for r in range(dim):
            for ax in range(dim):
                out[:, :, r] *= factor(ax, 1 if ax == r else 0)
        return out
    out = np.ones((npts, len(idx), dim, dim))
    for r in range(dim):
        for s in range(dim):
            for ax in range(dim):
                k = (ax == r) + (ax == s)
                out[:, :, r, s] *= factor(ax, k)
    return out


@dataclass(frozen=True)
class ReferenceElement:
    """Basis tables at the tensor Gauss points of [0,1]^d"""
    order: int
    dim: int

    @cached_property
    def points(self) -> np.ndarray:
        return np.array([tuple(reversed(p)) for p in product(GAUSS_POINTS_1D, repeat=self.dim)])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([np.prod(w) for w in product(GAUSS_WEIGHTS_1D, repeat=self.dim)])

    @cached_property
    def values(self) -> np.ndarray:
        return tensor_basis(self.order, self.points, 0)

    @cached_property
    def grads(self) -> np.ndarray:
        return tensor_basis(self.order, self.points, 1)

    @cached_property
    def hessians(self) -> np.ndarray:
        return tensor_basis(self.order, self.points, 2)


# ---------------------------------------------------------------------- #
# Meshes
# ---------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class BoundaryFace:
    """All boundary facets on one side of the square, with their quadrature"""
    axis: int
    side: int
    normal: np.ndarray
    elements: np.ndarray
    ref_points: np.ndarray
    weights: np.ndarray
    points: np.ndarray


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform grid of n^d cubes covering [origin, origin + length]^d"""
    n: int
    dim: int = 2
    origin: float = 0.0
    length: float = 1.0
    periodic: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise MeshError(f"mesh needs at least one element per axis, got {self.n}", key="n")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def n_elements(self) -> int:
        return self.n ** self.dim

    @property
    def volume(self) -> float:
        return self.length ** self.dim

    def reference(self, order: int) -> ReferenceElement:
        return _reference(order, self.dim)

    @cached_property
    def element_index(self) -> np.ndarray:
        """Element multi-indices (E, d), first axis fastest"""
        grids = np.meshgrid(*[np.arange(self.n)] * self.dim, indexing='ij')
        return np.stack([g.ravel(order='F') for g in grids], axis=-1)

    def nodes_per_axis(self, order: int) -> int:
        return order * self.n if self.periodic else order * self.n + 1

    def n_nodes(self, order: int) -> int:
        return self.nodes_per_axis(order) ** self.dim

    def _flatten(self, idx: np.ndarray, order: int) -> np.ndarray:
        npa = self.nodes_per_axis(order)
        strides = npa ** np.arange(self.dim)
        return idx @ strides

    def element_dofs(self, order: int) -> np.ndarray:
        return self._dofs[order]

    @cached_property
    def _dofs(self):
        out = {}
        for order in (1, 2):
            loc = local_multi_indices(order, self.dim)
            g = order * self.element_index[:, None, :] + loc[None, :, :]
            if self.periodic:
                g = np.mod(g, self.nodes_per_axis(order))
            out[order] = self._flatten(g, order)
        return out

    def node_multi_index(self, order: int) -> np.ndarray:
        npa = self.nodes_per_axis(order)
        grids = np.meshgrid(*[np.arange(npa)] * self.dim, indexing='ij')
        return np.stack([g.ravel(order='F') for g in grids], axis=-1)

    def node_coordinates(self, order: int) -> np.ndarray:
        return self.origin + self.node_multi_index(order) * (self.h / order)

    @cached_property
    def quadrature_points(self) -> np.ndarray:
        """Physical Gauss points (E, Q, d)"""
        ref = self.reference(2)
        return self.origin + (self.element_index[:, None, :] + ref.points[None, :, :]) * self.h

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Physical weights (Q,), identical on every element"""
        return self.reference(2).weights * self.h ** self.dim

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Element index and reference coordinates for points (P, d), half-open cells"""
        s = (np.asarray(points, dtype=float) - self.origin) / self.h
        e = np.floor(s)
        if self.periodic:
            t = s - e
            e = np.mod(e, self.n)
        else:
            e = np.clip(e, 0, self.n - 1)
            t = s - e
        e = e.astype(int)
        flat = e @ (self.n ** np.arange(self.dim))
        return flat, t

    # ------------------------------------------------------------------ #
    # Finite element evaluation
    # ------------------------------------------------------------------ #
    def evaluate(self, order: int, values: np.ndarray, deriv: int = 0) -> np.ndarray:
        """
        Evaluate a nodal field at all Gauss points.

        Args:
            values: nodal values (ncomp, N)
            deriv: 0 -> (E, Q, ncomp); 1 -> (E, Q, ncomp, d); 2 -> (E, Q, ncomp, d, d)
        """
        ref = self.reference(order)
        local = values[:, self.element_dofs(order)]
        if deriv == 0:
            return np.einsum('cek,qk->eqc', local, ref.values)
        if deriv == 1:
            return np.einsum('cek,qkr->eqcr', local, ref.grads) / self.h
        return np.einsum('cek,qkrs->eqcrs', local, ref.hessians) / self.h ** 2

    def evaluate_points(self, order: int, values: np.ndarray, points: np.ndarray,
                        deriv: int = 0, chunk: int = 65536) -> np.ndarray:
        """Evaluate a nodal field at arbitrary points (P, d); output leads with P"""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        dofs = self.element_dofs(order)
        out = []
        for start in range(0, len(points), chunk):
            elem, t = self.locate(points[start:start + chunk])
            basis = tensor_basis(order, t, deriv) / self.h ** deriv
            local = values[:, dofs[elem]]
            if deriv == 0:
                out.append(np.einsum('cpk,pk->pc', local, basis))
            elif deriv == 1:
                out.append(np.einsum('cpk,pkr->pcr', local, basis))
            else:
                out.append(np.einsum('cpk,pkrs->pcrs', local, basis))
        if not out:
            return np.zeros((0, values.shape[0]) + (self.dim,) * deriv)
        return np.concatenate(out, axis=0)


def _reference_cache():
    cache = {}

    def get(order: int, dim: int) -> ReferenceElement:
        key = (order, dim)
        if key not in cache:
            cache[key] = ReferenceElement(order, dim)
        return cache[key]
    return get


_reference = _reference_cache()


@dataclass(frozen=True)
class CellGrid(StructuredMesh):
    """Periodic grid on the torus [0,1)^d"""
    periodic: bool = True

    def __post_init__(self):
        super().__post_init__()
        if self.n < 4 or self.n % 2:
            raise MeshError(f"cell grid needs n >= 4 and even, got {self.n}", key="cell_n")
        if not self.periodic or self.origin != 0.0 or self.length != 1.0:
            raise MeshError("cell grid must be the periodic unit cell", key="cell_n")


@dataclass(frozen=True)
class DomainMesh(StructuredMesh):
    """Grid on the square (0,1)^d with a reflection-padding width in cells"""
    pad: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.periodic:
            raise MeshError("domain mesh cannot be periodic", key="m")
        if self.pad < 0 or self.pad > self.n:
            raise MeshError(f"pad must lie in [0, m], got {self.pad}", key="pad")

    @property
    def m(self) -> int:
        return self.n

    @property
    def pad_width(self) -> float:
        return self.pad * self.h

    @property
    def diameter(self) -> float:
        return self.length * np.sqrt(self.dim)

    @property
    def boundary_area(self) -> float:
        return 2 * self.dim * self.length ** (self.dim - 1)

    def padded(self) -> StructuredMesh:
        """Mesh over [-pad h, 1 + pad h]^d with the same spacing"""
        return StructuredMesh(
            n=self.n + 2 * self.pad, dim=self.dim,
            origin=self.origin - self.pad_width,
            length=self.length + 2 * self.pad_width,
        )

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float) - self.origin
        return np.minimum(x, self.length - x).min(axis=-1)

    @cached_property
    def boundary_facets(self) -> List[BoundaryFace]:
        faces = []
        d = self.dim
        others = [np.array(p) for p in product(GAUSS_POINTS_1D, repeat=d - 1)]
        wts = np.array([np.prod(w) for w in product(GAUSS_WEIGHTS_1D, repeat=d - 1)])
        for axis in range(d):
            for side in (0, 1):
                sel = self.element_index[:, axis] == (0 if side == 0 else self.n - 1)
                elements = np.nonzero(sel)[0]
                ref = np.array([np.insert(p, axis, float(side)) for p in others])
                normal = np.zeros(d)
                normal[axis] = 1.0 if side else -1.0
                pts = self.origin + (self.element_index[elements][:, None, :] + ref[None]) * self.h
                faces.append(BoundaryFace(
                    axis=axis, side=side, normal=normal, elements=elements,
                    ref_points=ref, weights=wts * self.h ** (d - 1), points=pts,
                ))
        return faces


def domain_mesh_for(eps_max: float, m: int, dim: int = 2, extra: int = 1) -> DomainMesh:
    """Domain mesh whose padding covers the eps_max smoothing cube"""
    pad = int(np.ceil(eps_max * m - 1e-9)) + extra
    return DomainMesh(n=m, dim=dim, pad=min(pad, m))
