"""Exception types shared across the solvers."""

from __future__ import annotations


class InvalidArgument(ValueError):
    """Raised when an operation is called outside its preconditions."""


class InvalidState(RuntimeError):
    """Raised when an object is not in a state that supports the request."""


class ConfigError(ValueError):
    """Configuration file or override could not be accepted.

    ``key`` names the offending entry (``None`` for syntax errors).
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class DivergedError(RuntimeError):
    """A time integration produced non-finite or exploding samples."""

    def __init__(self, message: str, last_good_time: float, last_good=None):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.last_good = last_good


class NotConvergedError(RuntimeError):
    """A steady-state search exhausted its budget above tolerance."""

    def __init__(self, message: str, best=None, residual: float = float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual
