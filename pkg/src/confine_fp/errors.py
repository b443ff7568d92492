"""Exception types raised across the package."""

from __future__ import annotations


class ConfineFPError(Exception):
    """Base class for all package errors."""


class InvalidArgument(ConfineFPError, ValueError):
    pass


class DimensionMismatch(InvalidArgument):
    pass


class DomainError(ConfineFPError, ValueError):
    """A point lies on or outside the boundary where the potential is singular."""


class EvaluationError(ConfineFPError, ArithmeticError):
    """A field returned NaN (or inf) at a quadrature point."""

    def __init__(self, message: str, triangle: int | None = None):
        super().__init__(message)
        self.triangle = triangle


class Unsupported(ConfineFPError, NotImplementedError):
    pass


class SolverFailure(ConfineFPError, RuntimeError):
    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class RejectedModel(ConfineFPError):
    """The confinement model fails one of the admissibility hypotheses."""

    def __init__(self, message: str, failed: tuple[str, ...] = ()):
        super().__init__(message)
        self.failed = failed


class SpectralFailure(ConfineFPError, RuntimeError):
    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = list(history or [])


class PathAbort(ConfineFPError, RuntimeError):
    """An SDE path could not leave a rejection loop even at the smallest step."""

    def __init__(self, message: str, path: int = -1, step: int = -1):
        super().__init__(message)
        self.path = path
        self.step = step
