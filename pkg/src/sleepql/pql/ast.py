"""AST node types and the canonical printer for the pipeline query language.

A query is a source table flowing through ordered stages:

    query := table_id ('|' stage)*
    stage := where | summarize | extend | project | sort | take | count

Stage order is semantically significant and preserved verbatim from parse.
``print_plan`` emits a text form that re-parses to a structurally identical
plan (the round-trip property the test suite pins down).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional, Union

from ..values import Value, ValueType, type_of

# -- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class Column:
    name: str


@dataclass(frozen=True)
class BinaryOp:
    op: str  # == != < <= > >= and or + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class FuncCall:
    name: str  # ago, now, ago_date, startofday, startofweek, bin, between
    args: tuple["Expr", ...]


Expr = Union[Literal, Column, BinaryOp, FuncCall]

COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOLEAN_OPS = ("and", "or")
ARITHMETIC_OPS = ("+", "-", "*", "/")

FUNCTIONS = ("ago", "now", "ago_date", "startofday", "startofweek", "bin", "between")

# -- stages ----------------------------------------------------------------


@dataclass(frozen=True)
class Aggregation:
    func: str  # sum | avg | min | max | count
    column: Optional[str] = None  # count takes no argument

    @property
    def output_name(self) -> str:
        if self.func == "count":
            return "count_"
        return f"{self.func}_{self.column}"


@dataclass(frozen=True)
class Where:
    expr: Expr


@dataclass(frozen=True)
class Summarize:
    aggregations: tuple[Aggregation, ...]
    by: tuple[str, ...] = ()


@dataclass(frozen=True)
class Extend:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Project:
    columns: tuple[str, ...]


@dataclass(frozen=True)
class Sort:
    column: str
    descending: bool = False


@dataclass(frozen=True)
class Take:
    n: int


@dataclass(frozen=True)
class CountStage:
    pass


Stage = Union[Where, Summarize, Extend, Project, Sort, Take, CountStage]


@dataclass(frozen=True)
class QueryPlan:
    source: str
    stages: tuple[Stage, ...] = ()


# -- printing --------------------------------------------------------------

_TIMESPAN_UNITS = (
    ("d", 86_400_000_000),
    ("h", 3_600_000_000),
    ("m", 60_000_000),
    ("s", 1_000_000),
    ("ms", 1_000),
    ("us", 1),
)


def format_literal(value: Value) -> str:
    t = type_of(value)
    if t == ValueType.NULL:
        return "null"
    if t == ValueType.BOOL:
        return "true" if value else "false"
    if t == ValueType.INT:
        return str(value)
    if t == ValueType.FLOAT:
        return repr(float(value))
    if t == ValueType.TEXT:
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if t == ValueType.TIMESTAMP:
        iso = value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")
        return f'datetime("{iso}")'
    if t == ValueType.TIMESPAN:
        micros = round(value.total_seconds() * 1_000_000)
        if micros == 0:
            return "0s"
        sign = "-" if micros < 0 else ""
        micros = abs(micros)
        for suffix, per in _TIMESPAN_UNITS:
            if micros % per == 0:
                return f"{sign}{micros // per}{suffix}"
    raise AssertionError(f"unprintable literal {value!r}")


# Precedence levels; children printing at a lower level get parenthesized.
_PRECEDENCE = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
               "+": 4, "-": 4, "*": 5, "/": 5}
# Comparisons do not chain (a < b < c is a syntax error), so a comparison
# operand of another comparison needs parentheses on either side.
_NON_ASSOC = frozenset({"==", "!=", "<", "<=", ">", ">="})


def print_expr(expr: Expr) -> str:
    return _print_expr(expr, 0)


def _print_expr(expr: Expr, parent_prec: int, right_side: bool = False) -> str:
    if isinstance(expr, Literal):
        return format_literal(expr.value)
    if isinstance(expr, Column):
        return expr.name
    if isinstance(expr, FuncCall):
        args = ", ".join(_print_expr(a, 0) for a in expr.args)
        return f"{expr.name}({args})"
    if isinstance(expr, BinaryOp):
        prec = _PRECEDENCE[expr.op]
        non_assoc = expr.op in _NON_ASSOC
        left = _print_expr(expr.left, prec, right_side=non_assoc)
        right = _print_expr(expr.right, prec, right_side=True)
        text = f"{left} {expr.op} {right}"
        # parenthesize when we bind looser than the context, or when we are
        # the right operand at equal precedence (operators parse left-assoc)
        if prec < parent_prec or (right_side and prec == parent_prec):
            return f"({text})"
        return text
    raise AssertionError(f"unknown expr node {expr!r}")


def print_stage(stage: Stage) -> str:
    if isinstance(stage, Where):
        return f"where {print_expr(stage.expr)}"
    if isinstance(stage, Summarize):
        aggs = ", ".join(
            f"{a.func}({a.column})" if a.column is not None else f"{a.func}()"
            for a in stage.aggregations
        )
        if stage.by:
            return f"summarize {aggs} by {', '.join(stage.by)}"
        return f"summarize {aggs}"
    if isinstance(stage, Extend):
        return f"extend {stage.name} = {print_expr(stage.expr)}"
    if isinstance(stage, Project):
        return f"project {', '.join(stage.columns)}"
    if isinstance(stage, Sort):
        direction = "desc" if stage.descending else "asc"
        return f"sort by {stage.column} {direction}"
    if isinstance(stage, Take):
        return f"take {stage.n}"
    if isinstance(stage, CountStage):
        return "count"
    raise AssertionError(f"unknown stage {stage!r}")


def print_plan(plan: QueryPlan) -> str:
    parts = [plan.source] + [print_stage(s) for s in plan.stages]
    return " | ".join(parts)


def walk_columns(expr: Expr):
    """Yield every column name referenced inside an expression."""
    if isinstance(expr, Column):
        yield expr.name
    elif isinstance(expr, BinaryOp):
        yield from walk_columns(expr.left)
        yield from walk_columns(expr.right)
    elif isinstance(expr, FuncCall):
        for arg in expr.args:
            yield from walk_columns(arg)


def parse_timestamp_literal(text: str) -> datetime:
    """Inverse of the datetime("...") form emitted by ``format_literal``."""
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
