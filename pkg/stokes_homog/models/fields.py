"""
Discrete fields on cell grids and domain meshes
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from ..core.errors import MeshError
from ..core.mesh import StructuredMesh


class SpaceTag(Enum):
    """Discrete spaces a GridFunction may live in"""
    VELOCITY_Q2 = "velocity-Q2"
    PRESSURE_Q1 = "pressure-Q1"
    SCALAR_Q2 = "scalar-Q2"
    CELL_VELOCITY_Q2 = "cell-velocity-Q2"
    CELL_PRESSURE_Q1 = "cell-pressure-Q1"
    CELL_SCALAR_Q2 = "cell-scalar-Q2"

    @property
    def order(self) -> int:
        return 1 if self in (SpaceTag.PRESSURE_Q1, SpaceTag.CELL_PRESSURE_Q1) else 2

    @property
    def on_cell(self) -> bool:
        return self.value.startswith("cell-")

    @property
    def is_vector(self) -> bool:
        return self in (SpaceTag.VELOCITY_Q2, SpaceTag.CELL_VELOCITY_Q2)

    def n_components(self, dim: int) -> int:
        return dim if self.is_vector else 1


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal coefficients (ncomp, n_nodes) of a continuous Q2 or Q1 field"""
    space_tag: SpaceTag
    values: np.ndarray
    mesh: StructuredMesh

    def __post_init__(self):
        if self.space_tag.on_cell != self.mesh.periodic:
            raise MeshError(
                f"space {self.space_tag.value} does not match mesh periodicity", key="mesh"
            )
        expected = (self.space_tag.n_components(self.mesh.dim),
                    self.mesh.n_nodes(self.space_tag.order))
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and expected[0] == 1:
            values = values[None, :]
        if values.shape != expected:
            raise MeshError(
                f"values shape {values.shape} does not match {self.space_tag.value} {expected}",
                key="values",
            )
        object.__setattr__(self, "values", values)

    # ---------------------------------------------------------------------- #
    # Construction
    # ---------------------------------------------------------------------- #
    @classmethod
    def zeros(cls, space_tag: SpaceTag, mesh: StructuredMesh) -> "GridFunction":
        shape = (space_tag.n_components(mesh.dim), mesh.n_nodes(space_tag.order))
        return cls(space_tag, np.zeros(shape), mesh)

    @classmethod
    def from_vector(cls, space_tag: SpaceTag, vector: np.ndarray,
                    mesh: StructuredMesh) -> "GridFunction":
        ncomp = space_tag.n_components(mesh.dim)
        return cls(space_tag, np.asarray(vector, dtype=float).reshape(ncomp, -1), mesh)

    @classmethod
    def interpolate(cls, space_tag: SpaceTag, func: Callable[[np.ndarray], np.ndarray],
                    mesh: StructuredMesh) -> "GridFunction":
        """Nodal interpolant of func(points (N, d)) -> (N,) or (N, ncomp)"""
        pts = mesh.node_coordinates(space_tag.order)
        vals = np.asarray(func(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        else:
            vals = vals.T
        return cls(space_tag, np.array(vals), mesh)

    # ---------------------------------------------------------------------- #
    # Access
    # ---------------------------------------------------------------------- #
    @property
    def order(self) -> int:
        return self.space_tag.order

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def vector(self) -> np.ndarray:
        """Component-blocked coefficient vector"""
        return self.values.ravel()

    def at_quadrature(self, deriv: int = 0) -> np.ndarray:
        return self.mesh.evaluate(self.order, self.values, deriv)

    def at_points(self, points: np.ndarray, deriv: int = 0) -> np.ndarray:
        return self.mesh.evaluate_points(self.order, self.values, points, deriv)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.space_tag, values, self.mesh)

    # ---------------------------------------------------------------------- #
    # Arithmetic
    # ---------------------------------------------------------------------- #
    def _check_compatible(self, other: "GridFunction"):
        if other.mesh != self.mesh or other.space_tag != self.space_tag:
            raise MeshError("GridFunctions live on different meshes or spaces", key="mesh")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class QuadratureField:
    """Values (E, Q, ...) sampled at the Gauss points of a mesh"""
    values: np.ndarray
    mesh: StructuredMesh

    def __post_init__(self):
        shape = np.shape(self.values)
        if shape[:2] != (self.mesh.n_elements, len(self.mesh.quadrature_weights)):
            raise MeshError(f"quadrature values shape {shape} does not match mesh", key="values")

    def __add__(self, other: "QuadratureField") -> "QuadratureField":
        if other.mesh != self.mesh:
            raise MeshError("QuadratureFields live on different meshes", key="mesh")
        return QuadratureField(self.values + other.values, self.mesh)

    def __sub__(self, other: "QuadratureField") -> "QuadratureField":
        if other.mesh != self.mesh:
            raise MeshError("QuadratureFields live on different meshes", key="mesh")
        return QuadratureField(self.values - other.values, self.mesh)

    def __mul__(self, scalar: float) -> "QuadratureField":
        return QuadratureField(self.values * float(scalar), self.mesh)

    __rmul__ = __mul__


Field = Union[GridFunction, QuadratureField]


# ---------------------------------------------------------------------- #
# Boundary-value problem data and solutions
# ---------------------------------------------------------------------- #
@dataclass(frozen=True)
class ProblemData:
    """
    Data (F, g, f) of a Neumann Stokes problem.

    F(x) -> (..., d); g(x) -> (...); f(x, n) -> (..., d) with n the outward normal.
    """
    F: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = "custom"


@dataclass
class GaugeRecord:
    """Normalizations applied to a solution"""
    velocity_mean_removed: np.ndarray
    pressure_mean: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "velocity_mean_removed": self.velocity_mean_removed.tolist(),
            "pressure_mean": self.pressure_mean,
            "multipliers": self.multipliers.tolist(),
        }


@dataclass
class FlowField:
    """Velocity / pressure pair with its gauge record and solver diagnostics"""
    u: GridFunction
    p: GridFunction
    gauge: GaugeRecord
    residual: float = 0.0
    h2_norm: Optional[float] = None
    label: str = ""

    @property
    def mesh(self):
        return self.u.mesh

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "m": self.mesh.n,
            "residual": self.residual,
            "h2_norm": self.h2_norm,
            "gauge": self.gauge.to_dict(),
        }
