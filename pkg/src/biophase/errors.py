"""Exception hierarchy.

Every error carries the CLI exit status it maps to, plus optional
``operation`` and ``quantity`` labels used in machine-readable error records.
"""

from __future__ import annotations


class BiophaseError(Exception):
    exit_code = 1

    def __init__(self, message: str, *, operation: str | None = None,
                 quantity: str | None = None):
        super().__init__(message)
        self.operation = operation
        self.quantity = quantity

    def record(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "operation": self.operation,
            "quantity": self.quantity,
            "exit_status": self.exit_code,
        }


# -- validation (exit 2) ----------------------------------------------------

class ValidationError(BiophaseError, ValueError):
    exit_code = 2


class DimensionError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, path: str = "", **kw):
        self.path = path
        full = f"{path}: {message}" if path else message
        kw.setdefault("quantity", path or None)
        kw.setdefault("operation", "parse_scenario")
        super().__init__(full, **kw)


class ZeroVectorError(ValidationError):
    pass


class NotBinormalizedError(ValidationError):
    pass


class GridError(ValidationError):
    pass


# -- spectrum (exit 3) ------------------------------------------------------

class DegenerateSpectrumError(BiophaseError):
    """Eigenvalues closer than the gap tolerance (degeneracy or exceptional point)."""

    exit_code = 3


# -- biorthogonality / anchors (exit 4) --------------------------------------

class BiorthogonalError(BiophaseError):
    exit_code = 4


class AnchorError(BiorthogonalError):
    pass


class AnchorSearchError(AnchorError):
    pass


class DegeneratePathError(BiorthogonalError):
    pass


# -- numerical (exit 5) ------------------------------------------------------

class NumericalError(BiophaseError):
    exit_code = 5


class SingularMatrixError(NumericalError):
    pass


class DriftError(NumericalError):
    pass


class AmbiguousMatchError(NumericalError):
    pass


# -- output (exit 6) ---------------------------------------------------------

class IoError(BiophaseError, OSError):
    exit_code = 6
