from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every failure raised by the lab"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.context}


class InvalidMeasure(LabError):
    """Spectral measure violates its construction invariants"""


class InvalidDomain(LabError):
    """Domain parameters do not describe a bounded open set"""


class InvalidScenario(LabError):
    """Scenario object is malformed"""


class DegenerateMeasure(LabError):
    """Measure is (numerically) supported on a hyperplane"""


class ZeroFrequency(LabError):
    """Fourier symbol requested at the origin"""


class InsufficientRegularity(LabError):
    """Field lacks the smoothness the evaluation needs"""


class TailUnknown(LabError):
    """Far-field contribution cannot be bounded from the field's decay data"""


class PointInsideDomain(LabError):
    """Exterior-only quantity requested at a point of the closed domain"""


class SupportViolation(LabError):
    """Field expected to vanish outside the domain does not"""


class GridTooCoarse(LabError):
    """Grid cannot resolve the data at the configured accuracy"""


class GridTooLarge(LabError):
    """Grid exceeds the configured node or unknown cap"""


class SingularSystem(LabError):
    """Assembled system could not be solved to the residual tolerance"""


class KernelNotNormalized(LabError):
    """Poisson kernel quadrature does not integrate to one"""


class UnsupportedOperator(LabError):
    """Operator/domain combination has no assembly path"""
