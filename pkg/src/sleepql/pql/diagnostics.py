"""Diagnostics carried out of parsing and validation."""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"

# diagnostic codes
SYNTAX = "SYNTAX"
UNKNOWN_TABLE = "UNKNOWN_TABLE"
UNKNOWN_COLUMN = "UNKNOWN_COLUMN"
UNKNOWN_FUNCTION = "UNKNOWN_FUNCTION"
BAD_ARITY = "BAD_ARITY"
TYPE_MISMATCH = "TYPE_MISMATCH"
FILTER_AFTER_AGGREGATE = "FILTER_AFTER_AGGREGATE"
FUTURE_RANGE = "FUTURE_RANGE"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    code: str
    span: tuple[int, int]  # byte range in the source text
    message: str

    def __str__(self) -> str:
        lo, hi = self.span
        return f"{self.severity} {self.code} [{lo}:{hi}]: {self.message}"


def errors(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == ERROR]


def warnings(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == WARNING]
