"""
Exception hierarchy for the familial e-value selector.
Library code raises these; the CLI maps them to exit codes.
"""

from typing import Iterable, Optional


class EvalueError(Exception):
    """Base class for all errors raised by this package"""


class StructuralError(EvalueError, ValueError):
    """Pedigree or matrix shapes that cannot be combined"""


class ConfigError(EvalueError, ValueError):
    """Invalid run configuration"""


class DataValidationError(EvalueError, ValueError):
    """Input file content that fails validation"""

    def __init__(self, message: str, file: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[str] = None):
        self.file = file
        self.line = line
        self.column = column

        location = []
        if file:
            location.append(str(file))
        if line is not None:
            location.append(f"line {line}")
        if column:
            location.append(f"column '{column}'")

        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)


class CrossReferenceError(DataValidationError):
    """Family/member ids that do not match across input files"""


class RankDeficiencyError(EvalueError, ArithmeticError):
    """Singular normal equations; carries the offending column labels"""

    def __init__(self, columns: Iterable[str], message: str = ""):
        self.columns = list(columns)
        text = message or "Design matrix is rank deficient"
        super().__init__(f"{text}; collinear columns: {', '.join(self.columns)}")


class DegenerateReferenceError(EvalueError, ArithmeticError):
    """Reference distribution with zero spread in some coordinate"""

    def __init__(self, coordinates: Iterable[int], message: str = ""):
        self.coordinates = list(coordinates)
        text = message or "Reference ensemble has no sampling variability"
        super().__init__(f"{text} at coordinates {self.coordinates}")


class ConvergenceWarning(UserWarning):
    """Variance-component optimizer stopped before converging"""


NUMERICAL_ERRORS = (RankDeficiencyError, DegenerateReferenceError)
