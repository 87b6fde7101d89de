"""Diagnostics and exception types shared across the package."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    """Location of a token in a source file. ``line`` and ``column`` are 1-based."""

    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan | None = None
    element: str | None = None
    severity: str = "error"

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span is not None else ""
        return f"{where}{self.severity}: {self.message}"


class StockflowError(Exception):
    """Base class for all package errors."""


class ModelError(StockflowError):
    """A model, scenario or source file failed validation.

    Carries the complete list of diagnostics; no partial result is produced.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class ParseError(ModelError):
    """Syntax error in a ``.sfm`` or ``.sfs`` source."""


class GridError(StockflowError, ValueError):
    """Invalid time grid or a time that is not aligned with it."""


class EvaluationError(StockflowError):
    """Expression evaluation failed (division by zero, non-finite value)."""

    def __init__(self, element: str, message: str, step: int | None = None, t: float | None = None):
        self.element = element
        self.reason = message
        self.step = step
        self.t = t
        where = f" at step {step} (t={t:g})" if step is not None else ""
        super().__init__(f"{message} in '{element}'{where}")

    def at_step(self, step: int, t: float) -> "EvaluationError":
        return EvaluationError(self.element, self.reason, step, t)
