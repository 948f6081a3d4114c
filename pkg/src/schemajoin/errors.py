class SchemaJoinError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SchemaJoinError, ValueError):
    """An argument is outside its allowed domain (bad k, q, gamma, ...)."""


class NotFound(SchemaJoinError, KeyError):
    """A looked-up attribute or concept is not registered."""


class NormalizationError(SchemaJoinError, ValueError):
    pass


class StateCorruption(SchemaJoinError):
    """A persisted state or table file fails to parse or validate."""


class DataError(SchemaJoinError, ValueError):
    """An input document (schema corpus, decisions file, ...) is malformed."""
