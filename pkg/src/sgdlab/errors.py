"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, argument, or dimension mismatch, detected before compute."""


class InsufficientDataError(ValueError):
    """An estimator was asked for more than the available samples support."""


class TraceFormatError(ValueError):
    """A trace CSV is malformed or missing a required column."""
