"""Exception types shared across the package."""


class GPLatentError(Exception):
    """Base class for all package errors."""


class DataError(GPLatentError):
    """Malformed or inconsistent input data."""


class ConfigError(GPLatentError):
    """Invalid run configuration."""


class DomainError(GPLatentError, ValueError):
    """Argument outside the declared domain (e.g. time outside [0, T])."""


class IllConditionedKernelError(GPLatentError):
    """Gram matrix could not be factorized within the jitter budget."""


class FitError(GPLatentError):
    """Estimation failed (non-finite objective, optimizer breakdown, ...)."""
