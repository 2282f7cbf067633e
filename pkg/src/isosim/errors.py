"""Exception hierarchy shared across the package."""

from __future__ import annotations


class IsosimError(Exception):
    """Base class for all package errors."""


class LexError(IsosimError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ParseError(IsosimError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class EvaluationError(IsosimError):
    """Raised when an expression cannot produce a finite real value.

    ``subexpression`` holds the printed form of the offending node.
    """

    def __init__(self, message: str, subexpression: str = ""):
        text = f"{message} in '{subexpression}'" if subexpression else message
        super().__init__(text)
        self.subexpression = subexpression


class TabulationError(EvaluationError):
    """Evaluation failed at a specific grid node (1-based node numbers)."""

    def __init__(self, cause: EvaluationError, where: str, index):
        IsosimError.__init__(self, f"{where} at grid node {index}: {cause}")
        self.subexpression = cause.subexpression
        self.index = index


class ValidationError(IsosimError):
    """Carries every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConvergenceError(IsosimError):
    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class StepSizeError(ConvergenceError):
    """Integrator left the admissible region (e.g. lost positivity)."""
