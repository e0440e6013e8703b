"""
Check data models for the property-verification suite
"""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional


class CheckModule(Enum):
    """Toolkit module a check exercises"""
    COEFF = "coeff"
    GRID = "grid"
    CELL = "cell"
    NEUMANN = "neumann"
    TWOSCALE = "twoscale"
    RATES = "rates"


class CheckSeverity(Enum):
    """Failure severity levels"""
    CRITICAL = "critical"
    MAJOR = "major"
    MINOR = "minor"
    INFO = "info"


@dataclass
class CheckConfig:
    """Configuration for a single check"""
    check_id: str
    name: str
    description: str
    module: CheckModule
    check_type: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    severity: CheckSeverity = CheckSeverity.MAJOR
    status: str = "active"


@dataclass
class CheckResult:
    """Result of running one check"""
    check_id: str
    name: str = ""
    module: str = ""

    passed: bool = False
    skipped: bool = False
    severity: Optional[CheckSeverity] = None
    measured: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    message: str = ""

    execution_time_ms: int = 0
    evaluated_at: datetime = field(default_factory=datetime.now)

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary"""
        return {
            "check_id": self.check_id,
            "name": self.name,
            "module": self.module,
            "status": self.status,
            "passed": self.passed,
            "severity": self.severity.value if self.severity else None,
            "measured": self.measured,
            "failures": self.failures,
            "message": self.message,
            "execution_time_ms": self.execution_time_ms,
        }
