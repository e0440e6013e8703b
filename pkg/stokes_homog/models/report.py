"""
Rate-study report data models
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

ERROR_COLUMNS = ("l2_u_err", "h1_v_err", "l2_p_err")
CSV_COLUMNS = ("eps", "l2_u_err", "h1_v_err", "l2_p_err", "div_v", "u0_h2")

DIV_IDENTITY_REL = 2e-2
# absolute floor for rows without a corrector (chi = 0): only solver round-off is left
DIV_IDENTITY_ABS = 1e-10


@dataclass
class RateRow:
    """Errors and diagnostics for one eps"""
    eps: float
    m: int
    l2_u_err: float
    h1_v_err: float
    l2_p_err: float
    div_v: float
    u0_h2: float

    # solver diagnostics
    residual_eps: float = 0.0
    residual_0: float = 0.0
    div_identity_raw: float = 0.0
    div_identity_weak: float = 0.0
    corrector_gradient_l2: float = 0.0
    grad_v_l2: float = 0.0
    c_ext: float = 0.0
    div_identity_tol: float = DIV_IDENTITY_REL
    boundary_layer: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return max(self.residual_eps, self.residual_0)

    @property
    def div_identity_ok(self) -> bool:
        """Weak divergence residual small against the corrector gradient it comes from"""
        bound = self.div_identity_tol * self.corrector_gradient_l2 + DIV_IDENTITY_ABS
        return self.div_identity_weak <= bound

    def csv_row(self) -> List[float]:
        return [getattr(self, c) for c in CSV_COLUMNS]

    def to_dict(self) -> Dict[str, Any]:
        out = {k: v for k, v in self.__dict__.items() if k != "timings"}
        out["residual"] = self.residual
        return out


@dataclass
class SlopeEntry:
    """Slope of one error column, or the reason none was fitted"""
    column: str
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r2: Optional[float] = None
    gate: Optional[float] = None
    passed: Optional[bool] = None
    flag: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class RateReport:
    """Per-eps rows, fitted slopes and run metadata"""
    rows: List[RateRow] = field(default_factory=list)
    slopes: Dict[str, SlopeEntry] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    flux: List[Dict[str, float]] = field(default_factory=list)
    flux_decreasing: Optional[bool] = None

    @property
    def gates_passed(self) -> bool:
        fitted = [s for s in self.slopes.values() if s.passed is not None]
        return all(s.passed for s in fitted)

    @property
    def div_identity_passed(self) -> bool:
        return all(r.div_identity_ok for r in self.rows)

    @property
    def passed(self) -> bool:
        """Slope gates, the divergence identity and, when measured, the flux pairing"""
        return (self.gates_passed and self.div_identity_passed
                and self.flux_decreasing is not False)

    def column(self, name: str) -> List[float]:
        return [getattr(r, name) for r in self.rows]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "slopes": {k: v.to_dict() for k, v in self.slopes.items()},
            "warnings": list(self.warnings),
            "gates_passed": self.gates_passed,
            "div_identity_passed": self.div_identity_passed,
            "flux": list(self.flux),
            "flux_decreasing": self.flux_decreasing,
            "passed": self.passed,
            "metadata": self.metadata,
        }
