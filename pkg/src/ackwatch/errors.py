"""Exception taxonomy shared across the package."""


class AckwatchError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(AckwatchError):
    """Invalid model or scenario configuration (bad dimensions, non-PD
    covariance, parameter out of range)."""


class ValidationError(ConfigurationError):
    """Scenario file or CLI input failed schema or invariant validation."""


class LogRetentionError(AckwatchError):
    """An estimate log is missing an entry it is required to retain.

    Raised on the encoding side; indicates an internal bookkeeping bug,
    not a protocol condition.
    """


class DecodeError(AckwatchError):
    """A packet references a time outside the receiver's retained history."""


class InvalidObservationError(AckwatchError):
    """An observation is impossible under both the pre- and post-change
    models (normalization factor would vanish)."""


class EvaluationError(AckwatchError):
    """A statistic was requested on an empty or unusable result set."""
