from typing import Optional, Sequence


class CurveFamilyError(ValueError):
    """Base class for every error raised by the curve family toolkit"""


class ConfigError(CurveFamilyError):
    """Invalid run configuration"""


class DomainError(CurveFamilyError):
    """Argument outside the domain of a sampled function or generator"""


class CriticalValue(CurveFamilyError):
    """Level is (numerically) a critical value of the function"""

    def __init__(self, message: str, level: Optional[float] = None):
        super().__init__(message)
        self.level = level


class ValidationError(CurveFamilyError):
    """Input data violates a structural invariant"""


class ConstructionError(CurveFamilyError):
    """A constructed family failed its closedness verification"""

    def __init__(self, message: str, lambdas: Sequence[float] = (), defects: Sequence[float] = ()):
        super().__init__(message)
        self.lambdas = list(lambdas)
        self.defects = list(defects)

    def defect_profile(self) -> str:
        return "\n".join(f"   λ={lam:+.3f}  defect={d:.3e}" for lam, d in zip(self.lambdas, self.defects))


class PolylineNotClosed(CurveFamilyError):
    """Base polyline of a discrete family is open"""


class UnbalancedSubset(CurveFamilyError):
    """Index subset does not sum to zero"""


class SearchCapExceeded(CurveFamilyError):
    """Exhaustive subset enumeration would exceed the configured cap"""


class PairFormatError(CurveFamilyError):
    """Malformed family pair or coefficient file"""

    def __init__(self, message: str, line_number: int = 0):
        prefix = f"line {line_number}: " if line_number else ""
        super().__init__(prefix + message)
        self.line_number = line_number
