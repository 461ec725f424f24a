"""Exception types raised across the package."""


class RffBlrError(Exception):
    """Base class for all package errors."""


class InvalidArgument(RffBlrError, ValueError):
    """A caller passed an argument that violates a precondition."""


class InvalidState(RffBlrError, RuntimeError):
    """An operation was requested on an object in the wrong state."""


class NumericalFailure(RffBlrError, ArithmeticError):
    """A factorization or moment computation broke down."""


class DataError(RffBlrError, ValueError):
    """A dataset file could not be parsed or is unsupported."""


class FormatError(RffBlrError, ValueError):
    """A model file has the wrong magic string or format version."""


class UndefinedMetric(RffBlrError, ValueError):
    """A metric is mathematically undefined for the given input."""
