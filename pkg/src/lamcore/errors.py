"""Exception types shared across the package."""


class LamError(Exception):
    """Base class for all lamcore errors."""


class ShapeMismatchError(LamError):
    """Operands whose shapes or channel counts do not line up."""


class InvalidInputError(LamError):
    """Non-finite values, bad ids, or misuse of a guidance mode."""


class DegenerateInputError(LamError):
    """Inputs that leave an operation undefined (e.g. zero valid pixels)."""


class FormatError(LamError):
    """Malformed file: bad magic, version, or truncated payload."""


class UndefinedMetricError(LamError):
    """Metric requested on a confusion matrix with no evaluable class."""
