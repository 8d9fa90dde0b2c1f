"""Source spans and diagnostics shared by the frontend and the checkers."""

from __future__ import annotations

from dataclasses import dataclass, field

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    """Half-open region of a source file, 1-based lines and columns."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.end_line, self.end_col) < (self.start_line, self.start_col):
            raise ValueError("span end precedes start")

    @staticmethod
    def point(file: str, line: int, col: int) -> "SourceSpan":
        return SourceSpan(file, line, col, line, col)

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class Diagnostic:
    """A single reported problem with a stable code.

    Codes: E0xx frontend, E1xx analysis, E2xx units, E3xx compilation,
    E4xx simulation setup, Wxxx warnings.
    """

    severity: str
    code: str
    message: str
    span: SourceSpan = field(default_factory=lambda: SourceSpan.point("<input>", 1, 1))

    def __str__(self) -> str:
        return f"{self.span}: {self.code}: {self.message}"

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR


def error(code: str, message: str, span: SourceSpan | None = None) -> Diagnostic:
    return Diagnostic(ERROR, code, message, span or SourceSpan.point("<input>", 1, 1))


def warning(code: str, message: str, span: SourceSpan | None = None) -> Diagnostic:
    return Diagnostic(WARNING, code, message, span or SourceSpan.point("<input>", 1, 1))


def has_errors(diagnostics) -> bool:
    return any(d.is_error for d in diagnostics)
