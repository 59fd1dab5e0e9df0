"""Shared exception taxonomy used across all jabkit modules."""


class JabkitError(Exception):
    """Base class for every error raised by jabkit."""


class DimensionMismatch(JabkitError):
    """Array shapes are inconsistent (e.g. feature rows vs response length)."""


class NonFiniteValue(JabkitError):
    """An input contains NaN or infinity where finite values are required."""


class EmptyInput(JabkitError):
    """An operation received an empty collection it cannot handle."""


class ConfigInvalid(JabkitError):
    """A configuration value violates its documented constraints."""


class UnsupportedScore(JabkitError):
    """A conformity score cannot be inverted without a response grid."""


class NumericalFailure(JabkitError):
    """A numerical routine (solve, power iteration) failed to converge."""


class ParseError(JabkitError):
    """A CSV cell could not be parsed; the message names row and column."""
