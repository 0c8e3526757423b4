"""Exception types shared across the package."""


class RecaptureError(Exception):
    """Base class for all package errors."""


class DataError(RecaptureError, ValueError):
    """Malformed or inconsistent input data."""


class DomainError(RecaptureError, ValueError):
    """Argument outside a function's mathematical domain."""


class IdentifiabilityError(RecaptureError, ValueError):
    """Dataset cannot identify the requested behavioral response."""


class DegenerateBaselineError(RecaptureError, ArithmeticError):
    """A baseline jump is zero at an observed capture time."""


class DegenerateExposureError(RecaptureError, ArithmeticError):
    """Total exposure is zero; conditioning corrections diverge."""


class EstimationError(RecaptureError, RuntimeError):
    """A numerical estimation step failed (divergence, singularity)."""
