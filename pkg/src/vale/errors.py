"""Exception hierarchy shared by all pipeline components."""

from __future__ import annotations


class ValeError(Exception):
    """Base class for every error raised by this package."""


class InputError(ValeError):
    """Caller supplied an invalid image, parameter, or file."""


class ConfigError(ValeError):
    """A configuration value violates its contract."""


class CapacityError(ValeError):
    """The requested computation exceeds a hard size limit."""


class TransportError(ValeError):
    """A remote service could not be reached or returned a non-200 status.

    Carries one timestamp per attempt so callers can see the retry history.
    """

    def __init__(self, message: str, attempts: list[float] | None = None,
                 status: int | None = None):
        super().__init__(message)
        self.attempts = list(attempts or [])
        self.status = status

    @property
    def retry_count(self) -> int:
        return max(0, len(self.attempts) - 1)


class ProtocolError(ValeError):
    """A remote service answered, but the payload violates the wire contract."""


class ConflictError(ValeError):
    """An identifier is already registered."""
