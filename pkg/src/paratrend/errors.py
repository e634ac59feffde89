"""Exception hierarchy. The CLI maps each class to its own exit code."""

from __future__ import annotations


class ParatrendError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ParatrendError, ValueError):
    """Invalid parameter or inconsistent configuration."""

    exit_code = 2


class InputError(ParatrendError, ValueError):
    """Malformed or unreadable input data."""

    exit_code = 3


class NumericalError(ParatrendError, ArithmeticError):
    """A numerical stage could not produce a valid result."""

    exit_code = 4


class SingularDesignError(NumericalError):
    """Local linear design matrix is singular at some evaluation point."""


class StageError(ParatrendError):
    """Wraps an error raised inside a named pipeline stage.

    ``state`` optionally carries a snapshot (for instance a clustering
    state) from which the computation can be resumed.
    """

    def __init__(self, stage: str, cause: BaseException, state=None):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.state = state
        self.exit_code = getattr(cause, "exit_code", 4)
