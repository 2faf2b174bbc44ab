"""Single-pass stage evaluator over a store snapshot.

All arithmetic the agent ever reports happens here; downstream response
rendering only formats what comes out. Evaluation is pure: the store is read
through ``scan`` (fresh row dicts), the clock comes exclusively from the
eval context, and identical inputs produce identical results.

Null handling follows SQL-style three-valued logic: comparisons and
arithmetic involving null yield null, ``where`` keeps only rows that are
definitely true, aggregates skip null cells, and an aggregate over nothing
is null (count excepted: it is 0). Division by zero yields null and a
warning rather than aborting the row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

from ..values import Value, ValueType, format_cell
from .ast import (Aggregation, BinaryOp, Column, CountStage, Expr, Extend,
                  FuncCall, Literal, Project, Sort, Summarize, Take, Where)
from .canonical import canonicalize
from .context import EvalContext
from .timefns import (EvalError, TIME_FUNCTIONS, arith, call_time_function,
                      check_overflow)
from .validate import ValidatedPlan


@dataclass
class QueryResult:
    columns: tuple[tuple[str, ValueType], ...]
    rows: list[tuple]
    provenance: str  # canonical text of the evaluated plan
    warnings: list[str] = field(default_factory=list)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def scalar(self) -> Value:
        """First cell, or None when the result is empty."""
        if not self.rows or not self.rows[0]:
            return None
        return self.rows[0][0]

    def to_dict(self) -> dict:
        return {
            "columns": [{"name": n, "type": t.value} for n, t in self.columns],
            "rows": [[_encode(v) for v in row] for row in self.rows],
            "row_count": self.row_count,
            "provenance": self.provenance,
            "warnings": list(self.warnings),
        }

    def render_table(self) -> str:
        names = self.column_names()
        cells = [[format_cell(v) for v in row] for row in self.rows]
        widths = [max([len(n)] + [len(r[i]) for r in cells]) for i, n in enumerate(names)]
        header = "  ".join(n.ljust(w) for n, w in zip(names, widths))
        rule = "  ".join("-" * w for w in widths)
        body = "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths))
                         for row in cells)
        out = header + "\n" + rule
        if body:
            out += "\n" + body
        return out


def _encode(value: Value):
    if isinstance(value, datetime):
        return {"$ts": value.isoformat()}
    if isinstance(value, timedelta):
        return {"$span_us": round(value.total_seconds() * 1e6)}
    return value


def evaluate(vplan: ValidatedPlan, store, ctx: EvalContext) -> QueryResult:
    """Run a validated plan against the store for the context's user."""
    warnings: list[str] = []
    rows = store.scan(vplan.table.name, ctx.user_id)
    for stage in vplan.plan.stages:
        rows = _apply_stage(stage, rows, ctx, warnings)
    columns = vplan.output_columns
    names = [name for name, _ in columns]
    tuples = [tuple(r.get(n) for n in names) for r in rows]
    provenance = canonicalize(vplan, ctx).text
    return QueryResult(tuple(columns), tuples, provenance, warnings)


def _apply_stage(stage, rows: list[dict], ctx: EvalContext,
                 warnings: list[str]) -> list[dict]:
    if isinstance(stage, Where):
        return [r for r in rows if _eval(stage.expr, r, ctx, warnings) is True]
    if isinstance(stage, Summarize):
        return _summarize(stage, rows, ctx, warnings)
    if isinstance(stage, Extend):
        out = []
        for r in rows:
            r = dict(r)
            r[stage.name] = _eval(stage.expr, r, ctx, warnings)
            out.append(r)
        return out
    if isinstance(stage, Project):
        return [{c: r.get(c) for c in stage.columns} for r in rows]
    if isinstance(stage, Sort):
        present = [r for r in rows if r.get(stage.column) is not None]
        absent = [r for r in rows if r.get(stage.column) is None]
        present.sort(key=lambda r: r[stage.column], reverse=stage.descending)
        return present + absent  # nulls sort last either direction
    if isinstance(stage, Take):
        return rows[: stage.n]
    if isinstance(stage, CountStage):
        return [{"count_": check_overflow(len(rows))}]
    raise AssertionError(f"unknown stage {stage!r}")


def _summarize(stage: Summarize, rows: list[dict], ctx: EvalContext,
               warnings: list[str]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    if stage.by:
        for r in rows:
            key = tuple(r.get(c) for c in stage.by)
            groups.setdefault(key, []).append(r)
        ordered = sorted(groups.items(), key=lambda kv: tuple(_key(v) for v in kv[0]))
    else:
        # aggregate over everything, even when empty: one output row
        ordered = [((), rows)]
    out = []
    for key, members in ordered:
        row = dict(zip(stage.by, key))
        for agg in stage.aggregations:
            row[agg.output_name] = _aggregate(agg, members)
        out.append(row)
    return out


def _key(value):
    return (1, 0) if value is None else (0, value)


def _aggregate(agg: Aggregation, rows: list[dict]) -> Value:
    if agg.func == "count":
        return check_overflow(len(rows))
    cells = [r.get(agg.column) for r in rows]
    cells = [c for c in cells if c is not None]
    if not cells:
        return None
    if agg.func == "sum":
        total = sum(cells)
        return check_overflow(total)
    if agg.func == "avg":
        return float(sum(cells)) / len(cells)
    if agg.func == "min":
        return min(cells)
    if agg.func == "max":
        return max(cells)
    raise AssertionError(f"unknown aggregation {agg.func!r}")


def _eval(expr: Expr, row: dict, ctx: EvalContext, warnings: list[str]) -> Value:
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Column):
        try:
            return row[expr.name]
        except KeyError:
            raise AssertionError(
                f"column {expr.name!r} missing at runtime; validator bug")
    if isinstance(expr, FuncCall):
        if expr.name == "between":
            x, lo, hi = (_eval(a, row, ctx, warnings) for a in expr.args)
            if x is None or lo is None or hi is None:
                return None
            return _compare("<=", lo, x) and _compare("<=", x, hi)
        if expr.name in TIME_FUNCTIONS:
            args = tuple(_eval(a, row, ctx, warnings) for a in expr.args)
            return call_time_function(expr.name, args, ctx)
        raise AssertionError(f"unknown function at runtime: {expr.name!r}")
    if isinstance(expr, BinaryOp):
        if expr.op in ("and", "or"):
            return _boolean(expr, row, ctx, warnings)
        left = _eval(expr.left, row, ctx, warnings)
        right = _eval(expr.right, row, ctx, warnings)
        if expr.op in ("==", "!=", "<", "<=", ">", ">="):
            if left is None or right is None:
                return None
            return _compare(expr.op, left, right)
        return arith(expr.op, left, right, warnings)
    raise AssertionError(f"unknown expr node {expr!r}")


def _boolean(expr: BinaryOp, row: dict, ctx: EvalContext,
             warnings: list[str]) -> Value:
    left = _eval(expr.left, row, ctx, warnings)
    right = _eval(expr.right, row, ctx, warnings)
    if expr.op == "and":
        if left is False or right is False:
            return False
        if left is None or right is None:
            return None
        return True
    if left is True or right is True:
        return True
    if left is None or right is None:
        return None
    return False


def _compare(op: str, left: Value, right: Value) -> bool:
    try:
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right
    except TypeError as exc:
        raise AssertionError(f"untyped comparison reached runtime: {exc}")
