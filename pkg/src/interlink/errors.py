"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so keep the split between
configuration, data, and numerical failures intact.
"""


class InterlinkError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(InterlinkError):
    """Invalid configuration value or unknown configuration key."""


class DataError(InterlinkError):
    """Malformed or inconsistent input data."""


class NumericalError(InterlinkError):
    """Non-finite values or failed numerical routines."""
