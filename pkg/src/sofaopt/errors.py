"""Exception types shared across the package."""


class SofaError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SofaError):
    """Invalid configuration (layer sizes, grids, angle sequences, ...)."""


class NumericalError(SofaError):
    """A computation produced a non-finite value and was aborted."""


class EnvelopeUndefined(SofaError):
    """Raised when every sample of a movement has ~zero rotation rate.

    Signals a pure translation, for which the wall envelopes do not exist.
    """


class DegenerateGeometry(SofaError):
    """Fringe assembly received no usable curves."""


class EmptyGeometry(SofaError):
    """A waterfall fall was requested with no curves at all."""


class ShapeMismatch(SofaError):
    """Two profiles do not share the same source columns."""


class Unsupported(SofaError):
    """Requested operation is not available for this configuration."""


class UnboundedRegion(SofaError):
    """The constrained region has no finite horizontal extent."""


class ParseError(SofaError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class RunExists(SofaError):
    """Attempt to write into a run directory that already holds a run."""
