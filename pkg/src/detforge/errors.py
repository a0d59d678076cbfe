"""Exception hierarchy shared across the toolkit."""


class DetforgeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(DetforgeError):
    """Malformed input text (FCIDUMP, CSV, JSON config)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SymmetryError(DetforgeError):
    """Operands violate particle-number or Sz symmetry."""


class CapacityError(DetforgeError):
    """A determinant space or nonzero budget exceeded its configured cap."""


class NotPSDError(DetforgeError):
    """Two-body tensor is not positive semidefinite up to the cutoff scale."""


class DegenerateFit(DetforgeError):
    """Extrapolation abscissae are degenerate (duplicate variances)."""


class InsufficientData(DetforgeError):
    """Too few data points for a statistical analysis."""


class DivergenceGuard(DetforgeError):
    """Trial/walker overlap collapsed below the safe threshold."""


class RunAbort(DetforgeError):
    """An AFQMC trajectory became unrecoverable (e.g. total weight underflow)."""


class InternalError(DetforgeError):
    """Internal consistency check failed; indicates a bug, not bad input."""
