class ImmuneSomError(Exception):
    """Base class for errors raised by this package."""


class InputDomainError(ImmuneSomError, ValueError):
    """A raw value lies outside the domain a normalizer accepts."""


class SequencingError(ImmuneSomError, ValueError):
    """Timestamps are out of order or two keyed streams disagree."""


class ConfigError(ImmuneSomError, ValueError):
    """Invalid parameter set or scenario configuration."""
