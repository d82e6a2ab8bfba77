"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, data errors 3,
numerical/convergence errors 4.
"""


class QCoralError(Exception):
    """Base class for all package errors."""


class DimensionError(QCoralError, ValueError):
    """Operands have incompatible or empty shapes."""


class ValidationError(QCoralError, ValueError):
    """An input violates a structural invariant (asymmetry, bad norm, ...)."""


class DataError(QCoralError, ValueError):
    """A dataset file or dataset specification cannot be used."""


class ConfigurationError(QCoralError, ValueError):
    """A configuration value is outside its valid range."""


class ConvergenceError(QCoralError, RuntimeError):
    """An iterative procedure failed to converge; may carry partial results."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PostselectionError(ConvergenceError):
    """Ancilla postselection succeeded with (numerically) zero probability."""
