"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: wrong domain, malformed coordinates, invalid parameters."""


class DomainError(ValueError):
    """Structurally valid input outside the supported regime (e.g. box too wide)."""


class EstimationFailedError(RuntimeError):
    """An estimator could not produce a point estimate (e.g. all trials censored)."""


class OracleCapError(RuntimeError):
    """Exact oracle refused: state space exceeds the configured cap."""


class ProviderGapError(KeyError):
    """A rate/acceptance provider has no value for the requested trait."""


class ConfigError(ValueError):
    """Experiment configuration is malformed or contains unknown keys."""
