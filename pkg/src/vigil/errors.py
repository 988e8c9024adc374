"""Exception types shared across the monitoring packages."""

from __future__ import annotations


class VigilError(Exception):
    """Base class for all errors raised by this package."""


class KeyNotFoundError(VigilError):
    """A stream key has no observations in the store."""


class UnknownRegionError(VigilError):
    """A region is absent from the loaded geographic hierarchy."""


class InsufficientDataError(VigilError):
    """A stream has too little history to compute an expectation."""


class EmptyRunError(VigilError):
    """No scoring run exists for the requested date."""


class LeafRegionError(VigilError):
    """A child-context operation was requested for a region without children."""


class RecordNotFoundError(VigilError):
    """A triage record or meta-event id does not exist."""


class ValidationError(VigilError):
    """An input record or patch was rejected."""


class FilterParseError(VigilError):
    """A filter expression failed to parse.

    `position` is the character offset of the offending token.
    """

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position

    def __str__(self) -> str:
        return f"{self.args[0]} (at position {self.position})"
