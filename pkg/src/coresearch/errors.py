"""Shared exception types."""


class CoresearchError(Exception):
    """Base class for all package errors."""


class ParseError(CoresearchError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CoresearchError):
    """A domain invariant is violated; names the offending record when known."""


class NotFoundError(CoresearchError):
    """Lookup by id failed."""


class ConfigError(CoresearchError):
    """Invalid or inconsistent configuration."""


class TrainingError(CoresearchError):
    """Non-finite gradients or other unrecoverable training state."""


class FormatError(CoresearchError):
    """Binary file does not match the expected layout."""
