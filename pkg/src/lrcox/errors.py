"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration; the message lists every offending field."""


class DataError(ValueError):
    """Malformed dataset, manifest, or artifact."""


class NumericalError(RuntimeError):
    """A solve became numerically unusable or an objective left the finite range."""
