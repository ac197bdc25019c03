"""Exception types shared across the package."""


class RbmGradLabError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionMismatchError(RbmGradLabError):
    """Vector/matrix shapes are inconsistent with the model."""


class EnumerationLimitError(RbmGradLabError):
    """Model too large for exact enumeration on both sides."""


class DataFormatError(RbmGradLabError):
    """Malformed input file (bad magic, truncation, bad values)."""


class NumericAbortError(RbmGradLabError):
    """Training produced non-finite parameters."""


class ProtocolError(RbmGradLabError):
    """Variance-protocol constraint violated (e.g. missing cells)."""
