"""Exception types raised across the cmden package."""

from typing import Any, Optional


class CMDENError(Exception):
    """Base class for all cmden errors."""


class InvalidInputError(CMDENError, ValueError):
    """Raised when an operation receives input outside its contract."""


class FormatError(CMDENError, ValueError):
    """Raised when a file on disk does not match its expected format."""


class NonFiniteError(CMDENError, ArithmeticError):
    """Raised when a pipeline stage produces NaN or infinite values.

    Attributes:
        stage: Name of the first stage whose output was not finite.
    """

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        message = f"non-finite values produced by stage '{stage}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class DivergenceError(CMDENError, RuntimeError):
    """Raised when the optimizer loss grows past the divergence threshold.

    Attributes:
        trace: Loss trace recorded up to and including the diverged step.
    """

    def __init__(self, message: str, trace: Optional[list[Any]] = None):
        super().__init__(message)
        self.trace = list(trace or [])
