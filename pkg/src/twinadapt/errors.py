"""Error taxonomy shared across the package.

Exit-code mapping for the CLI lives on the classes so command wrappers
don't need a lookup table: config problems exit 2, data problems exit 3,
anything else that escapes is a runtime failure and exits 4.
"""


class TwinAdaptError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 4


class ConfigError(TwinAdaptError):
    """Invalid configuration value, flag combination, or config file."""

    exit_code = 2


class DataError(TwinAdaptError):
    """Corpus, checkpoint, or import data that cannot be used."""

    exit_code = 3
