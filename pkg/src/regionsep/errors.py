"""Error taxonomy used by the CLI exit-code contract.

Both subclass ValueError so library callers can keep catching that.
"""

__all__ = ["ConfigError", "DataError"]


class ConfigError(ValueError):
    """Bad arguments or configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Missing or malformed data files (CLI exit code 3)."""
