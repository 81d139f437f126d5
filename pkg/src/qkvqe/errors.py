"""Exception types shared across the package."""


class QkvqeError(Exception):
    """Base class for package-specific errors."""


class InvalidSizeError(QkvqeError, ValueError):
    """A size/count argument is out of the supported range."""


class ShapeError(QkvqeError, ValueError):
    """Array or operator dimensions do not match."""


class ConfigError(QkvqeError, ValueError):
    """Invalid configuration or hyperparameter value."""


class CapacityError(QkvqeError, ValueError):
    """Requested object exceeds the configured memory/size caps."""


class ConditioningError(QkvqeError, RuntimeError):
    """Matrix factorization failed even after jitter escalation."""


class UnsupportedError(QkvqeError, ValueError):
    """Operation is outside the supported feature set."""


class UndefinedMetricError(QkvqeError, ValueError):
    """A metric is undefined for the given inputs (e.g. zero variance)."""
