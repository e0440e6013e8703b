"""
Exception hierarchy for the homogenization toolkit
"""

from typing import Optional


class HomogError(Exception):
    """Base class for toolkit errors"""
    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.key = key

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": self.message,
            "key": self.key,
            "exit_code": self.exit_code,
        }


class ConfigError(HomogError, ValueError):
    """Invalid configuration or parameters"""
    exit_code = 2


class CoefficientError(ConfigError):
    """Unknown coefficient family or invalid family params"""


class AnalyticGradientError(CoefficientError):
    """Coefficient family has no analytic gradient"""


class MeshError(HomogError, ValueError):
    """Mesh mismatch, bad strip radius, insufficient padding"""
    exit_code = 2


class UnderResolvedError(MeshError):
    """Mesh spacing does not resolve the oscillation scale"""


class SolverError(HomogError, RuntimeError):
    """Factorization failure or residual above tolerance"""


class IndefiniteSystemError(SolverError):
    """Singular or indefinite saddle-point system"""


class CompatibilityError(HomogError, ValueError):
    """Data violate the solvability condition"""


class GaugeError(HomogError, ValueError):
    """Solution passed without the mean normalization"""


class InsufficientDataError(HomogError):
    """Too few data points for a slope fit"""
    exit_code = 3
