"""Error types shared across the toolkit.

ConfigError maps to CLI exit code 2, DataError to exit code 3.
"""


class RefineryError(Exception):
    pass


class ConfigError(RefineryError):
    """Invalid or inconsistent configuration (bad stage order, missing thresholds...)."""


class DataError(RefineryError):
    """Input data violates a contract (unsupported compression, checksum mismatch...)."""
