"""
Exceptions and warnings raised by the GFA toolkit
"""
from typing import Optional


class GFAError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class PreconditionError(GFAError, ValueError):
    """An argument or documented precondition is violated"""
    exit_code = 4


class ConfigError(GFAError):
    """Scenario configuration is malformed"""
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ParseError(GFAError):
    """Input data file cannot be read as a numeric matrix"""
    exit_code = 2

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        self.row = row
        self.column = column
        if row is not None:
            loc = f"row {row}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


class NumericalError(GFAError):
    """A numerical contract failed"""
    exit_code = 3


class NonFiniteError(NumericalError):
    pass


class SymmetryError(NumericalError):
    pass


class PSDViolationError(NumericalError):
    pass


class SupplierInconsistencyError(NumericalError):
    """Eigenvalues decreased along the grid: the supplier is not nested"""


class NoDecompositionError(NumericalError):
    """Every tracked eigenvalue diverges"""


class DegenerateFactorError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    def __init__(self, message: str, column: int):
        self.column = column
        super().__init__(message)


class InsufficientReplicatesError(NumericalError):
    pass


class GFAWarning(UserWarning):
    pass


class CollinearityWarning(GFAWarning):
    """Loading columns span a rank-deficient subspace at some truncation"""


class IncompleteSplitWarning(GFAWarning):
    """A line frequency is still visible in the residual after splitting"""
