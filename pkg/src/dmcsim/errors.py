"""Exception types shared across the package."""


class DmcError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DmcError):
    """Invalid dimensions, parameters, or cross-field config constraints."""


class DataError(DmcError):
    """Malformed or inconsistent rating data."""


class ParseError(DataError):
    """A data file failed to parse; message carries the line number."""


class SingularityError(DmcError):
    """A positive-definite factorization failed even after the ridge retry."""


class GenerationError(DmcError):
    """Random generation exhausted its retry budget."""


class NumericsError(DmcError):
    """A non-finite value appeared in agent state."""
