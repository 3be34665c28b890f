"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (1 config/usage, 2 data format,
3 numeric fault).
"""


class MGSTCError(Exception):
    """Base class for all package errors."""


class ConfigError(MGSTCError, ValueError):
    """Invalid configuration value or combination of values."""


class DataFormatError(MGSTCError, ValueError):
    """Input file is malformed or violates the ingestion contract."""


class DimensionError(MGSTCError, ValueError):
    """Operand shapes are incompatible."""


class UsageError(MGSTCError, RuntimeError):
    """An API was called in a state where it is not defined."""


class DomainError(MGSTCError, ValueError):
    """Arguments fall outside the region where a closed form holds."""


class NumericFault(MGSTCError, FloatingPointError):
    """A non-finite value appeared inside the network."""

    def __init__(self, layer: str, message: str | None = None):
        self.layer = layer
        super().__init__(message or f"non-finite values produced by layer '{layer}'")
