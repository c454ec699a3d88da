"""Exceptions raised by the ddsr library."""


class DdsrError(Exception):
    """Base class for all library errors."""


class DimensionError(DdsrError):
    """Problem dimensions violate a required inequality or do not match.

    Not a ``ValueError``: pydantic re-raises it unchanged from model
    validators instead of wrapping it in a ``ValidationError``.
    """


class InfeasibleSeparation(DdsrError):
    """No parameter set with the requested minimal separation could be drawn."""


class ZeroSignal(DdsrError, ValueError):
    """A relative quantity was requested for an all-zero signal."""


class ConfigError(DdsrError):
    """An experiment or solver configuration is inconsistent.

    Like DimensionError it propagates unchanged out of model validators.
    """
