"""Exception and warning types."""


class PdppError(Exception):
    """Base class for package errors."""


class DomainError(PdppError, ValueError):
    """A point lies outside the parameter domain."""


class ConfigError(PdppError, ValueError):
    """Invalid configuration or hyperparameters."""


class DataError(PdppError, ValueError):
    """Malformed or degenerate input data."""


class NumericalError(PdppError, RuntimeError):
    """A numerical routine failed (singular factorisation, stalled rejection loop, ...)."""


class SingularConfigurationWarning(UserWarning):
    """A point configuration has (numerically) zero determinantal density."""
