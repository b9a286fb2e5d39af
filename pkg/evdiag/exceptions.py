"""Exceptions for the eddy viscosity diagnostics toolkit."""

from __future__ import annotations


class EVDiagError(Exception):
    """Base exception for evdiag errors."""


class ValidationError(EVDiagError, ValueError):
    """Input data is malformed: shapes, ranks, non-finite values, degenerate records."""


class RangeError(EVDiagError, ValueError):
    """A numeric argument lies outside its admissible range."""


class UndefinedScaleError(EVDiagError):
    """A flow scale needed by a statistic is zero or missing."""


class ClosureInputError(EVDiagError):
    """Closure fields are missing or violate nonnegativity."""


class SolverError(EVDiagError):
    """The mini solver produced an unusable state."""

    def __init__(self, message: str, step_index: int) -> None:
        """Initialize with the step at which the failure occurred."""
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index


class SnapshotFormatError(EVDiagError):
    """A snapshot file header is invalid."""

    def __init__(self, message: str, offset: int) -> None:
        """Initialize with the byte offset of the offending header entry."""
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class SnapshotLengthError(EVDiagError):
    """A snapshot payload is shorter or longer than its header declares."""


class ConfigError(EVDiagError):
    """A config or manifest file failed validation."""

    def __init__(self, message: str, key: str | None = None) -> None:
        """Initialize with the offending key, when known."""
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
