"""Exception types shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4).
"""


class ConfigError(ValueError):
    """Invalid configuration or hyperparameter combination."""


class DimensionError(ConfigError):
    """Array shapes do not conform."""


class DataError(ValueError):
    """Malformed or insufficient input data."""


class NumericError(FloatingPointError):
    """NaN or Inf encountered during training."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given labels (e.g. single-class AUC)."""
