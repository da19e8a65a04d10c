"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes, so new error conditions should reuse
one of the classes below instead of raising bare ValueError.
"""


class ModelPickError(Exception):
    """Base class for all package errors."""


class ConfigError(ModelPickError):
    """Invalid configuration file, flag combination, or parameter value."""


class DataError(ModelPickError):
    """Malformed or inconsistent input data (CSV ingestion, shape checks)."""
