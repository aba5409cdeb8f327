"""Exception types shared across the package."""


class StarkNLSError(Exception):
    """Base class for all package errors."""


class DivergedFieldError(StarkNLSError):
    """A field contains NaN or Inf samples where finite data is required."""


class GridMismatchError(StarkNLSError):
    """Two fields live on different grids."""


class IterationError(StarkNLSError):
    """An iterative solver failed to converge within its budget."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class DegenerateSeedError(StarkNLSError):
    """A fixed-point iteration collapsed to the zero field."""


class ResolutionError(StarkNLSError):
    """Requested feature cannot be resolved on the given grid."""


class InsufficientDataError(StarkNLSError):
    """A trajectory does not carry enough samples for the requested analysis."""


class NoBoundError(StarkNLSError):
    """No finite blow-up time bound exists for the given data (global regime)."""


class BracketError(StarkNLSError):
    """A bisection range does not bracket a sign change of the outcome."""


class ConfigError(StarkNLSError):
    """A scenario configuration file is malformed or inconsistent."""
