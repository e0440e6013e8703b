"""
Semi-analytic reference solutions used to check the cell solvers
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..core.errors import CoefficientError
from ..models.coefficient import CoefficientField, identity_tensor

# Gauss-Legendre rule per layer interval; the interval ends include y1 = 1/2
GAUSS_POINTS = 8


@dataclass
class LaminateOracle:
    """
    Reduced 1-D solution for an isotropic layered coefficient lam(y1) delta delta.

    Only chi_1^{2} (shear across the layers) and pi_1^1 are nonzero:
    d/dy1 chi_1^{22} = c / lam - 1 with c the harmonic mean, pi_1^1 = lam - <lam>.
    Means come from a composite Gauss rule whose breakpoints include the layer
    interface, so the sharp two-phase laminate is integrated exactly and chi is
    exactly piecewise linear between the breakpoints.
    """
    coefficient: CoefficientField
    y: np.ndarray
    harmonic: float
    arithmetic: float
    chi_profile: np.ndarray
    dim: int = 2

    @classmethod
    def from_coefficient(cls, A: CoefficientField, intervals: int = 2048) -> "LaminateOracle":
        if not A.name.startswith("laminate"):
            raise CoefficientError("laminate oracle needs the laminate family", key="family")
        if intervals < 2 or intervals % 2:
            raise CoefficientError("oracle intervals must be even", key="intervals")
        y = np.linspace(0.0, 1.0, intervals + 1)
        t, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
        h = 1.0 / intervals
        nodes = y[:-1, None] + 0.5 * h * (t[None, :] + 1.0)
        weights = 0.5 * h * w
        pts = np.zeros(nodes.shape + (A.dim,))
        pts[..., 0] = nodes
        lam = A.eval(pts)[..., 0, 0, 0, 0]

        inv_parts = (weights / lam).sum(axis=1)
        harmonic = 1.0 / inv_parts.sum()
        arithmetic = float((weights * lam).sum())
        chi = np.concatenate([[0.0], np.cumsum(harmonic * inv_parts - h)])
        # chi is linear on each interval for the sharp laminate, so the trapezoid mean is exact
        chi -= h * (chi[:-1] + chi[1:]).sum() / 2.0
        return cls(coefficient=A, y=y, harmonic=float(harmonic), arithmetic=arithmetic,
                   chi_profile=chi, dim=A.dim)

    @property
    def a_hat(self) -> np.ndarray:
        a = self.arithmetic * identity_tensor(self.dim)
        a[0, 0, 1, 1] = self.harmonic
        return a

    def _lam(self, points: np.ndarray) -> np.ndarray:
        return self.coefficient.eval(np.asarray(points, dtype=float))[:, 0, 0, 0, 0]

    def chi(self, points: np.ndarray) -> np.ndarray:
        """chi[p, j, b, c] at cell points (P, d)"""
        d = self.dim
        y1 = np.mod(np.asarray(points)[:, 0], 1.0)
        out = np.zeros((len(y1), d, d, d))
        out[:, 0, 1, 1] = np.interp(y1, self.y, self.chi_profile)
        return out

    def grad_chi(self, points: np.ndarray) -> np.ndarray:
        """d chi_j^{cb}/dy_k as [p, j, b, c, k]"""
        d = self.dim
        out = np.zeros((len(points), d, d, d, d))
        out[:, 0, 1, 1, 0] = self.harmonic / self._lam(points) - 1.0
        return out

    def pi(self, points: np.ndarray) -> np.ndarray:
        """pi[p, j, b]"""
        d = self.dim
        out = np.zeros((len(points), d, d))
        out[:, 0, 0] = self._lam(points) - self.arithmetic
        return out

    def b(self, points: np.ndarray) -> np.ndarray:
        """b[p, i, j, a, b]"""
        lam = self._lam(points)
        out = (lam - self.arithmetic)[:, None, None, None, None] * identity_tensor(self.dim)
        out[:, 0, 0, 1, 1] = 0.0
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "harmonic_mean": self.harmonic,
            "arithmetic_mean": self.arithmetic,
            "a_hat": self.a_hat.tolist(),
        }
