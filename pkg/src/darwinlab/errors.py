"""Exception types raised across darwinlab."""


class DarwinLabError(Exception):
    """Base class for all library errors."""


class CapacityError(DarwinLabError):
    """A dimension exceeds a configured cap."""


class ArgumentError(DarwinLabError, ValueError):
    """Malformed arguments: unknown labels, overlapping parts, length mismatches."""


class PreconditionError(DarwinLabError, ValueError):
    """Input violates a mathematical precondition (non-Hermitian, non-PSD, ...)."""


class DegenerateSupportError(DarwinLabError):
    """A map or state has empty support where a non-empty one is required."""


class DegenerateInputError(DarwinLabError):
    """The input carries no information for the requested analysis."""
