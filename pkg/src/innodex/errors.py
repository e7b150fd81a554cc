"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class InnodexError(Exception):
    exit_code = 1


class ConfigError(InnodexError):
    exit_code = 2


class DataError(InnodexError):
    exit_code = 3


class ValidationError(DataError, ValueError):
    """Input violates a documented invariant (bad ring, length mismatch, ...)."""


class StageDependencyError(DataError):
    """A stage was asked to run before its upstream artifacts exist or match."""


class SourceError(InnodexError):
    exit_code = 4
