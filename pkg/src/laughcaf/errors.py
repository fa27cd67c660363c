"""Exception types shared across the package.

The CLI maps these onto exit codes: data problems exit with 3, numeric
failures with 4.
"""


class LaughcafError(Exception):
    """Base class for package errors."""


class DataError(LaughcafError):
    """Malformed or missing input data."""


class LayoutError(DataError):
    """Channel layout not supported by the requested operation."""


class FormatError(DataError):
    """A file does not follow the expected binary or text format."""


class DimensionError(LaughcafError, ValueError):
    """Array shapes do not line up."""


class ConfigError(LaughcafError, ValueError):
    """Invalid configuration value or unknown key."""


class NumericError(LaughcafError, ArithmeticError):
    """Non-finite values during optimisation."""
