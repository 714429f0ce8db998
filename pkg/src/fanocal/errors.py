"""Exception hierarchy shared across the package."""


class FanocalError(Exception):
    """Base class for all package errors."""


class ConfigError(FanocalError, ValueError):
    """Invalid experiment configuration or command line input."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalError(FanocalError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class SeriesNotConverged(NumericalError):
    pass


class TruncationError(NumericalError):
    """A distribution could not be truncated within the allowed support."""


class FitError(NumericalError):
    pass


class ReconstructionError(NumericalError):
    pass


class ShotFileError(FanocalError, OSError):
    """Malformed or unreadable shot-record / report file."""
