"""Exception types raised across the package."""


class InvalidParametersError(ValueError):
    """Raised when an operation receives arguments outside its domain."""


class ConfigurationError(ValueError):
    """Raised when an experiment configuration is rejected before any frame runs."""
