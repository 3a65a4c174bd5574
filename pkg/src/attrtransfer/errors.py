"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
malformed or inconsistent data with 3, and failures inside a stage with 4.
"""


class AttrTransferError(Exception):
    """Base class for all package errors."""


class ConfigError(AttrTransferError, ValueError):
    """Invalid configuration, hyperparameters or missing inputs."""


class DataError(AttrTransferError, ValueError):
    """Input data is malformed or violates a domain invariant."""


class ParseError(DataError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class DuplicateError(DataError):
    pass


class DomainError(DataError):
    """A value lies outside its permitted domain (e.g. annotation not in {-1, 0, 1})."""


class SchemaError(DataError):
    pass


class ShapeError(DataError):
    pass


class SplitError(DataError):
    pass


class StageError(AttrTransferError, RuntimeError):
    """A pipeline stage could not produce its output."""


class LookupFailure(StageError, KeyError):
    """Lookup on a discarded or unknown attribute."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""
