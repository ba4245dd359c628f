"""Exception types shared by the library and the command line."""


class LowsigError(Exception):
    """Base class for all errors raised by lowsig."""


class ConfigError(LowsigError, ValueError):
    """Invalid configuration, geometry, schema or usage (CLI exit code 2)."""


class DataError(LowsigError, ValueError):
    """Input data violates a precondition, e.g. non-positive counts (CLI exit code 3)."""
