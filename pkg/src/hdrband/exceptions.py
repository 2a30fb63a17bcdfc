"""Exception types raised by hdrband."""


class HDRError(ValueError):
    """Base class for data and numerical errors raised by this package."""


class DegenerateLevelError(HDRError):
    """The requested level is tangent to the density (a local extremum)."""


class CrossingError(HDRError):
    """Level crossings of a pilot density estimate could not be located.

    ``diagnostics`` holds whatever was computed before the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoInteriorMinimumError(HDRError):
    """A one-dimensional minimization ended on the boundary of its bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class PipelineError(HDRError):
    """Failure inside the plug-in bandwidth selector, tagged by step number."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step
