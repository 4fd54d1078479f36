"""Exception hierarchy shared by all modules."""


class AnomtypesError(Exception):
    """Base class for every error raised by this package."""


class DataError(AnomtypesError, ValueError):
    """Malformed or invalid input data (CSV, schema, score files)."""


class ParameterError(AnomtypesError, ValueError):
    """A threshold or configuration value is out of range, or a precondition fails."""


class InjectionError(AnomtypesError):
    """An anomaly could not be constructed under the requested constraints."""
