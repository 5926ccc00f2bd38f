"""Exception hierarchy shared across the package."""


class FullCountError(Exception):
    """Base class for all errors raised by :mod:`fullcount`."""


class DimensionError(FullCountError, ValueError):
    """Operands live on incompatible spaces."""


class ConfigError(FullCountError):
    """A run configuration could not be parsed or is inconsistent."""


class InstabilityError(FullCountError):
    """A drift matrix (or model) does not admit a stable steady state."""


class ConvergenceError(FullCountError):
    """An iterative or linear solve did not reach its tolerance."""

    def __init__(self, message, order=None, residual=None):
        super().__init__(message)
        self.order = order
        self.residual = residual


class DimensionCapError(FullCountError):
    """A dense problem exceeds the configured size cap."""


class UndefinedFanoError(FullCountError, ZeroDivisionError):
    """The Fano factor is undefined because the mean count rate vanishes."""
