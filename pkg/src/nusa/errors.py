"""Exception types shared across the package."""


class NusaError(Exception):
    """Base class for all library errors."""


class InvalidInputError(NusaError, ValueError):
    """Non-finite, malformed, or out-of-contract numeric input."""


class DimensionMismatchError(NusaError, ValueError):
    """Operands with incompatible shapes."""


class DegenerateInputError(NusaError, ValueError):
    """Input with no usable signal (e.g. a vector of near-zero norm)."""


class UnsupportedOperationError(NusaError, RuntimeError):
    """Operation not applicable to the given model (e.g. trivial null space)."""


class NumericError(NusaError, ArithmeticError):
    """Non-finite values produced during computation."""


class DataError(NusaError, ValueError):
    """Malformed dataset or model file; the message carries the location."""


class ConfigError(NusaError, ValueError):
    """Invalid configuration file or option value."""


class UndefinedMetricError(NusaError, ValueError):
    """Metric undefined for the given inputs (e.g. single-class truth)."""
