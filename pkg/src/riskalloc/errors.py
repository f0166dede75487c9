"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3, numerical failures exit 4.
"""


class RiskallocError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RiskallocError):
    """Invalid run configuration (bad config file, misaligned inputs)."""


class ParameterError(RiskallocError):
    """Invalid argument passed to an operation."""


class ParseError(RiskallocError):
    """Malformed file content; message carries the offending line number."""


class SchemaError(RiskallocError):
    """File structure does not match the documented schema."""


class DataError(RiskallocError):
    """Data values violate an invariant (non-positive price, missing price)."""


class ModelError(RiskallocError):
    """Covariance input unusable (not positive definite)."""


class ConvergenceError(RiskallocError):
    """Iterative solver exhausted its iteration budget."""


class DegenerateSeriesError(RiskallocError):
    """A return series cannot be standardized (zero volatility estimate)."""


class EstimatorError(RiskallocError):
    """A volatility estimator produced an unusable value."""
