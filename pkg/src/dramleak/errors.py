"""Exception types shared across the package."""

from __future__ import annotations


class DramLeakError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DramLeakError, ValueError):
    """A physical parameter or argument is outside its valid domain."""


class WrongMechanismError(DramLeakError, ValueError):
    """An operation was asked to handle a stress mechanism it does not support."""


class NotReachedError(DramLeakError):
    """The flip target was not reached before the hammer budget ran out."""

    def __init__(self, message: str, last_hc: int):
        super().__init__(message)
        self.last_hc = last_hc


class ObservationParseError(DramLeakError, ValueError):
    """Malformed observation file; carries the offending line and column."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{', '.join(loc)}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigError(DramLeakError, ValueError):
    """Invalid or incomplete run configuration."""
