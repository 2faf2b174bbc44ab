"""Semantic validation: schema checks, typing, and the two query-shape rules.

Beyond ordinary schema/type checking this enforces:

* filter-then-aggregate — a ``where`` that touches the table's time column
  placed after a ``summarize`` is rejected with FILTER_AFTER_AGGREGATE
  (aggregating first silently changes what the time filter means);
* FUTURE_RANGE — a time comparison whose resolved bound lies beyond the
  evaluation clock draws a warning, since such ranges were observed to creep
  into generated queries.

A plan that validated cleanly cannot raise a type error during evaluation;
the evaluator treats any such occurrence as an internal bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Optional

from ..schema import TABLES, TableSchema
from ..values import ValueType, comparable, type_of
from .ast import (Aggregation, BinaryOp, Column, CountStage, Expr, Extend,
                  FuncCall, Literal, Project, QueryPlan, Sort, Summarize,
                  Take, Where, print_expr, walk_columns)
from .context import EvalContext
from .diagnostics import (BAD_ARITY, Diagnostic, ERROR, FILTER_AFTER_AGGREGATE,
                          FUTURE_RANGE, TYPE_MISMATCH, UNKNOWN_COLUMN,
                          UNKNOWN_FUNCTION, UNKNOWN_TABLE, WARNING)
from .timefns import const_eval, is_resolved

_NUMERIC = {ValueType.INT, ValueType.FLOAT}
_ORDERABLE = {ValueType.INT, ValueType.FLOAT, ValueType.TEXT,
              ValueType.TIMESTAMP, ValueType.TIMESPAN}

_FUNC_SIGNATURES: dict[str, tuple[tuple[ValueType, ...], ValueType]] = {
    "now": ((), ValueType.TIMESTAMP),
    "ago": ((ValueType.TIMESPAN,), ValueType.TIMESTAMP),
    "ago_date": ((ValueType.INT,), ValueType.TEXT),
    "startofday": ((ValueType.TIMESTAMP,), ValueType.TIMESTAMP),
    "startofweek": ((ValueType.TIMESTAMP,), ValueType.TIMESTAMP),
    "bin": ((ValueType.TIMESTAMP, ValueType.TIMESPAN), ValueType.TIMESTAMP),
}


@dataclass(frozen=True)
class ValidatedPlan:
    plan: QueryPlan
    table: TableSchema
    output_columns: tuple[tuple[str, ValueType], ...]
    warnings: tuple[Diagnostic, ...] = ()


@dataclass
class ValidationResult:
    validated: Optional[ValidatedPlan]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.validated is not None

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == WARNING]


class _Checker:
    def __init__(self, table: TableSchema, span: tuple[int, int]):
        self.table = table
        self.span = span
        self.diagnostics: list[Diagnostic] = []

    def error(self, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(ERROR, code, self.span, message))

    def warning(self, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(WARNING, code, self.span, message))

    def infer(self, expr: Expr, env: dict[str, ValueType]) -> Optional[ValueType]:
        """Type of the expression, or None after recording a diagnostic."""
        if isinstance(expr, Literal):
            return type_of(expr.value)
        if isinstance(expr, Column):
            if expr.name not in env:
                self.error(UNKNOWN_COLUMN, f"unknown column {expr.name!r}")
                return None
            return env[expr.name]
        if isinstance(expr, FuncCall):
            return self.infer_call(expr, env)
        if isinstance(expr, BinaryOp):
            left = self.infer(expr.left, env)
            right = self.infer(expr.right, env)
            if left is None or right is None:
                return None
            return self.infer_binary(expr.op, left, right)
        raise AssertionError(f"unknown expr node {expr!r}")

    def infer_call(self, call: FuncCall, env: dict[str, ValueType]) -> Optional[ValueType]:
        if call.name == "between":
            if len(call.args) != 3:
                self.error(BAD_ARITY, "between(x, lo, hi) takes 3 arguments")
                return None
            types = [self.infer(a, env) for a in call.args]
            if any(t is None for t in types):
                return None
            x, lo, hi = types
            if not (comparable(x, lo) and comparable(x, hi)):
                self.error(TYPE_MISMATCH,
                           f"between() bounds must be comparable with "
                           f"{print_expr(call.args[0])}")
                return None
            return ValueType.BOOL
        sig = _FUNC_SIGNATURES.get(call.name)
        if sig is None:
            self.error(UNKNOWN_FUNCTION, f"unknown function {call.name!r}")
            return None
        params, result = sig
        if len(call.args) != len(params):
            self.error(BAD_ARITY,
                       f"{call.name}() takes {len(params)} argument(s), "
                       f"got {len(call.args)}")
            return None
        for arg, expected in zip(call.args, params):
            got = self.infer(arg, env)
            if got is None:
                return None
            if got != expected and not (expected == ValueType.FLOAT and got == ValueType.INT):
                self.error(TYPE_MISMATCH,
                           f"{call.name}() expects {expected.value}, got {got.value}")
                return None
        return result

    def infer_binary(self, op: str, left: ValueType, right: ValueType) -> Optional[ValueType]:
        if op in ("and", "or"):
            for side in (left, right):
                if side not in (ValueType.BOOL, ValueType.NULL):
                    self.error(TYPE_MISMATCH, f"{op!r} needs boolean operands, got {side.value}")
                    return None
            return ValueType.BOOL
        if op in ("==", "!=", "<", "<=", ">", ">="):
            if not comparable(left, right):
                self.error(TYPE_MISMATCH,
                           f"cannot compare {left.value} with {right.value}")
                return None
            return ValueType.BOOL
        # arithmetic
        if left in _NUMERIC and right in _NUMERIC:
            if op == "/":
                return ValueType.FLOAT
            if left == ValueType.INT and right == ValueType.INT:
                return ValueType.INT
            return ValueType.FLOAT
        pair = (left, right)
        if op == "-" and pair == (ValueType.TIMESTAMP, ValueType.TIMESTAMP):
            return ValueType.TIMESPAN
        if op in ("+", "-") and pair == (ValueType.TIMESTAMP, ValueType.TIMESPAN):
            return ValueType.TIMESTAMP
        if op == "+" and pair == (ValueType.TIMESPAN, ValueType.TIMESTAMP):
            return ValueType.TIMESTAMP
        if op in ("+", "-") and pair == (ValueType.TIMESPAN, ValueType.TIMESPAN):
            return ValueType.TIMESPAN
        if op == "*" and (pair == (ValueType.TIMESPAN, ValueType.INT)
                          or pair == (ValueType.TIMESPAN, ValueType.FLOAT)
                          or pair == (ValueType.INT, ValueType.TIMESPAN)
                          or pair == (ValueType.FLOAT, ValueType.TIMESPAN)):
            return ValueType.TIMESPAN
        if op == "/" and left == ValueType.TIMESPAN and right in _NUMERIC:
            return ValueType.TIMESPAN
        if ValueType.NULL in pair:
            return ValueType.NULL
        self.error(TYPE_MISMATCH, f"no operator {op!r} for {left.value} and {right.value}")
        return None


def validate(plan: QueryPlan,
             tables: dict[str, TableSchema] = TABLES,
             ctx: Optional[EvalContext] = None,
             stage_spans: tuple[tuple[int, int], ...] = ()) -> ValidationResult:
    """Check a parsed plan against the schema; errors make it unevaluable.

    ``ctx`` enables the FUTURE_RANGE check (resolved time bounds compared to
    the context clock); without it only structural checks run.
    """
    result = ValidationResult(None)
    if plan.source not in tables:
        result.diagnostics.append(Diagnostic(
            ERROR, UNKNOWN_TABLE, _span_for(stage_spans, -1),
            f"unknown table {plan.source!r}"))
        return result
    table = tables[plan.source]
    env: dict[str, ValueType] = dict(table.columns)
    seen_summarize = False

    for i, stage in enumerate(plan.stages):
        checker = _Checker(table, _span_for(stage_spans, i))
        if isinstance(stage, Where):
            time_refs = sorted(set(walk_columns(stage.expr)) & set(table.time_columns))
            infer_env = env
            if time_refs and seen_summarize:
                checker.error(FILTER_AFTER_AGGREGATE,
                              f"time filter on {', '.join(time_refs)} must precede "
                              "summarize (filter-then-aggregate rule)")
                # the specific diagnostic covers these columns; don't also
                # report them as unknown
                infer_env = {**env, **{c: table.columns[c] for c in time_refs}}
            t = checker.infer(stage.expr, infer_env)
            if t is not None and t not in (ValueType.BOOL, ValueType.NULL):
                checker.error(TYPE_MISMATCH, f"where needs a boolean, got {t.value}")
            if ctx is not None:
                _check_future_bounds(stage.expr, table, ctx, checker)
        elif isinstance(stage, Summarize):
            seen_summarize = True
            new_env: dict[str, ValueType] = {}
            for col in stage.by:
                if col not in env:
                    checker.error(UNKNOWN_COLUMN, f"unknown group-by column {col!r}")
                else:
                    new_env[col] = env[col]
            for agg in stage.aggregations:
                out_type = _check_aggregation(agg, env, checker)
                if out_type is not None:
                    if agg.output_name in new_env:
                        checker.error(TYPE_MISMATCH,
                                      f"duplicate aggregation output {agg.output_name!r}")
                    new_env[agg.output_name] = out_type
            env = new_env
        elif isinstance(stage, Extend):
            t = checker.infer(stage.expr, env)
            if t is not None:
                env = {**env, stage.name: t}
        elif isinstance(stage, Project):
            new_env = {}
            for col in stage.columns:
                if col not in env:
                    checker.error(UNKNOWN_COLUMN, f"unknown column {col!r}")
                else:
                    new_env[col] = env[col]
            env = new_env
        elif isinstance(stage, Sort):
            if stage.column not in env:
                checker.error(UNKNOWN_COLUMN, f"unknown sort column {stage.column!r}")
            elif env[stage.column] not in _ORDERABLE:
                checker.error(TYPE_MISMATCH,
                              f"cannot sort by {env[stage.column].value} column")
        elif isinstance(stage, Take):
            pass
        elif isinstance(stage, CountStage):
            env = {"count_": ValueType.INT}
        result.diagnostics.extend(checker.diagnostics)

    if any(d.severity == ERROR for d in result.diagnostics):
        return result
    warnings = tuple(d for d in result.diagnostics if d.severity == WARNING)
    result.validated = ValidatedPlan(plan, table,
                                     tuple(env.items()), warnings)
    return result


def _span_for(stage_spans, i: int) -> tuple[int, int]:
    if 0 <= i < len(stage_spans):
        return stage_spans[i]
    return (0, 0)


def _check_aggregation(agg: Aggregation, env: dict[str, ValueType],
                       checker: _Checker) -> Optional[ValueType]:
    if agg.func == "count":
        return ValueType.INT
    if agg.column not in env:
        checker.error(UNKNOWN_COLUMN, f"unknown column {agg.column!r}")
        return None
    col_type = env[agg.column]
    if agg.func in ("sum", "avg"):
        if col_type not in _NUMERIC:
            checker.error(TYPE_MISMATCH,
                          f"{agg.func}() needs a numeric column, got {col_type.value}")
            return None
        if agg.func == "avg":
            return ValueType.FLOAT
        return col_type
    # min / max
    if col_type not in _ORDERABLE:
        checker.error(TYPE_MISMATCH,
                      f"{agg.func}() needs an orderable column, got {col_type.value}")
        return None
    return col_type


def _check_future_bounds(expr: Expr, table: TableSchema, ctx: EvalContext,
                         checker: _Checker) -> None:
    """Warn when a comparison pins a time column against a bound past now."""
    if isinstance(expr, BinaryOp):
        if expr.op in ("and", "or"):
            _check_future_bounds(expr.left, table, ctx, checker)
            _check_future_bounds(expr.right, table, ctx, checker)
            return
        if expr.op in ("==", "!=", "<", "<=", ">", ">="):
            for col_side, bound_side in ((expr.left, expr.right), (expr.right, expr.left)):
                if isinstance(col_side, Column) and col_side.name in table.time_columns:
                    _warn_if_future(bound_side, ctx, checker)
            return
    if isinstance(expr, FuncCall) and expr.name == "between" and len(expr.args) == 3:
        x, lo, hi = expr.args
        if isinstance(x, Column) and x.name in table.time_columns:
            _warn_if_future(lo, ctx, checker)
            _warn_if_future(hi, ctx, checker)


def _warn_if_future(bound: Expr, ctx: EvalContext, checker: _Checker) -> None:
    value = const_eval(bound, ctx)
    if not is_resolved(value):
        return
    if isinstance(value, datetime):
        if value > ctx.now:
            checker.warning(FUTURE_RANGE,
                            f"time bound {value.isoformat()} lies after now")
    elif isinstance(value, str):
        try:
            bound_date = date.fromisoformat(value)
        except ValueError:
            return
        if bound_date > ctx.local_today:
            checker.warning(FUTURE_RANGE, f"date bound {value} lies after today")
