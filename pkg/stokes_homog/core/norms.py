"""
Quadrature norms, strip norms and means of discrete fields
"""

from typing import Union

import numpy as np

from .errors import MeshError
from .mesh import DomainMesh, StructuredMesh
from ..models.fields import Field, GridFunction, QuadratureField


def integrate(mesh: StructuredMesh, values: np.ndarray) -> np.ndarray:
    """Integral of Gauss-point values (E, Q, ...) over the mesh"""
    return np.tensordot(mesh.quadrature_weights, values.sum(axis=0), axes=(0, 0))


def _squared_density(values: np.ndarray) -> np.ndarray:
    """|v|^2 per Gauss point, summed over trailing component axes"""
    sq = values ** 2
    return sq.reshape(sq.shape[0], sq.shape[1], -1).sum(axis=-1)


def quadrature_l2(mesh: StructuredMesh, values: np.ndarray, mask: np.ndarray = None) -> float:
    density = _squared_density(values)
    if mask is not None:
        density = np.where(mask, density, 0.0)
    return float(np.sqrt(max(integrate(mesh, density), 0.0)))


def _values(f: Field) -> np.ndarray:
    if isinstance(f, QuadratureField):
        return f.values
    return f.at_quadrature(0)


def _check_mesh(f: Field, mesh: StructuredMesh = None):
    if mesh is not None and f.mesh != mesh:
        raise MeshError("field does not live on the given mesh", key="mesh")


def l2_norm(f: Field, mesh: StructuredMesh = None) -> float:
    _check_mesh(f, mesh)
    return quadrature_l2(f.mesh, _values(f))


def h1_seminorm(f: GridFunction, mesh: StructuredMesh = None) -> float:
    _check_mesh(f, mesh)
    return quadrature_l2(f.mesh, f.at_quadrature(1))


def h1_norm(f: GridFunction, mesh: StructuredMesh = None) -> float:
    return float(np.hypot(l2_norm(f, mesh), h1_seminorm(f, mesh)))


def h2_surrogate(f: GridFunction) -> float:
    """Broken H^2 norm: L2, gradient and element-wise Hessians of the field"""
    hess = quadrature_l2(f.mesh, f.at_quadrature(2))
    return float(np.sqrt(l2_norm(f) ** 2 + h1_seminorm(f) ** 2 + hess ** 2))


def strip_mask(mesh: DomainMesh, r: float) -> np.ndarray:
    """Gauss points within distance r of the boundary"""
    if not isinstance(mesh, DomainMesh):
        raise MeshError("strip norms need a bounded domain mesh", key="mesh")
    if not 0.0 < r <= mesh.diameter:
        raise MeshError(f"strip radius r={r} outside (0, diam]", key="r")
    return mesh.distance_to_boundary(mesh.quadrature_points) <= r


def strip_norm(f: Field, r: float) -> float:
    """L2 norm over the r-neighbourhood of the boundary inside the domain"""
    return quadrature_l2(f.mesh, _values(f), strip_mask(f.mesh, r))


def interior_norm(f: Field, r: float) -> float:
    """L2 norm over the complement of the r-strip"""
    return quadrature_l2(f.mesh, _values(f), ~strip_mask(f.mesh, r))


def mean(f: Field) -> Union[float, np.ndarray]:
    """Average over the domain; scalar for one-component fields"""
    avg = integrate(f.mesh, _values(f)) / f.mesh.volume
    if np.ndim(avg) == 0:
        return float(avg)
    if np.ndim(avg) == 1 and avg.shape[0] == 1:
        return float(avg[0])
    return avg


def subtract_mean(f: Field) -> Field:
    avg = integrate(f.mesh, _values(f)) / f.mesh.volume
    if isinstance(f, QuadratureField):
        return QuadratureField(f.values - avg, f.mesh)
    return f.with_values(f.values - np.reshape(avg, (-1, 1)))
