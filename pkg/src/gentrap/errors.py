"""Exception types shared across the package."""


class GentrapError(Exception):
    """Base class for package errors."""


class DimensionError(GentrapError, ValueError):
    """Tensor shapes do not agree."""


class PreconditionError(GentrapError, ValueError):
    """An operation was called outside its documented domain."""


class ConfigError(GentrapError, ValueError):
    """Invalid configuration value."""


class SchemaError(GentrapError, ValueError):
    """An input table is missing a required column."""


class DataError(GentrapError, ValueError):
    """Input data cannot be processed (e.g. an all-missing series)."""


class ThresholdError(GentrapError, ValueError):
    """Autoencoder threshold cannot be chosen from the validation set."""


class TrainingDivergence(GentrapError, RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []
