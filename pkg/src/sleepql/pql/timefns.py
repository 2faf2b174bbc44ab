"""Runtime semantics of the time functions, plus constant folding.

``startofday``/``startofweek`` resolve in the context's timezone (local
midnight, local Monday midnight) and return UTC instants; ``bin`` floors
against the UTC epoch. ``ago_date(n)`` yields the ISO date n days before the
context's local today, the companion to date-valued ``local_date`` columns.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Optional

from ..values import Value, check_int64
from .ast import BinaryOp, Column, Expr, FuncCall, Literal
from .context import EvalContext

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class EvalError(Exception):
    """Runtime evaluation failure (overflow, bad function input)."""


def start_of_local_day(ts: datetime, ctx: EvalContext) -> datetime:
    local = ts.astimezone(ctx.tz)
    midnight = local.replace(hour=0, minute=0, second=0, microsecond=0)
    return midnight.astimezone(timezone.utc)


def start_of_local_week(ts: datetime, ctx: EvalContext) -> datetime:
    local = ts.astimezone(ctx.tz)
    monday = local - timedelta(days=local.weekday())
    midnight = monday.replace(hour=0, minute=0, second=0, microsecond=0)
    return midnight.astimezone(timezone.utc)


def call_time_function(name: str, args: tuple[Value, ...], ctx: EvalContext) -> Value:
    if name == "now":
        return ctx.now
    if name == "ago":
        (span,) = args
        if span is None:
            return None
        return ctx.now - span
    if name == "ago_date":
        (n,) = args
        if n is None:
            return None
        return (ctx.local_today - timedelta(days=int(n))).isoformat()
    if name == "startofday":
        (ts,) = args
        return None if ts is None else start_of_local_day(ts, ctx)
    if name == "startofweek":
        (ts,) = args
        return None if ts is None else start_of_local_week(ts, ctx)
    if name == "bin":
        ts, span = args
        if ts is None or span is None:
            return None
        if span <= timedelta(0):
            raise EvalError("bin() needs a positive timespan")
        span_us = round(span.total_seconds() * 1e6)
        offset_us = round((ts - _EPOCH).total_seconds() * 1e6)
        return _EPOCH + timedelta(microseconds=(offset_us // span_us) * span_us)
    raise AssertionError(f"not a time function: {name}")


TIME_FUNCTIONS = ("now", "ago", "ago_date", "startofday", "startofweek", "bin")


def arith(op: str, left: Value, right: Value,
          warn: Optional[list[str]] = None) -> Value:
    if left is None or right is None:
        return None
    lnum = isinstance(left, (int, float)) and not isinstance(left, bool)
    rnum = isinstance(right, (int, float)) and not isinstance(right, bool)
    lts = isinstance(left, datetime)
    rts = isinstance(right, datetime)
    lsp = isinstance(left, timedelta)
    rsp = isinstance(right, timedelta)
    if op == "/":
        if rnum and right == 0:
            if warn is not None:
                warn.append("division by zero")
            return None
        if lnum and rnum:
            return left / right
        if lsp and rnum:
            return left / right
    elif op == "*":
        if lnum and rnum:
            out = left * right
            return check_overflow(out)
        if lsp and rnum:
            return left * right
        if lnum and rsp:
            return right * left
    elif op == "+":
        if lnum and rnum:
            return check_overflow(left + right)
        if lts and rsp:
            return left + right
        if lsp and rts:
            return right + left
        if lsp and rsp:
            return left + right
    elif op == "-":
        if lnum and rnum:
            return check_overflow(left - right)
        if lts and rts:
            return left - right
        if lts and rsp:
            return left - right
        if lsp and rsp:
            return left - right
    raise AssertionError(f"untyped arithmetic reached runtime: {op} on "
                         f"{type(left).__name__}/{type(right).__name__}")


def check_overflow(value):
    if isinstance(value, int) and not isinstance(value, bool):
        try:
            check_int64(value)
        except Exception as exc:
            raise EvalError(str(exc)) from exc
    return value


_UNRESOLVED = object()


def const_eval(expr: Expr, ctx: EvalContext):
    """Resolve an expression built only from literals, time functions and
    arithmetic to a concrete value; returns ``_UNRESOLVED`` sentinel when the
    expression references columns or non-foldable calls."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Column):
        return _UNRESOLVED
    if isinstance(expr, FuncCall):
        if expr.name not in TIME_FUNCTIONS:
            return _UNRESOLVED
        args = tuple(const_eval(a, ctx) for a in expr.args)
        if any(a is _UNRESOLVED for a in args):
            return _UNRESOLVED
        return call_time_function(expr.name, args, ctx)
    if isinstance(expr, BinaryOp):
        if expr.op not in ("+", "-", "*", "/"):
            return _UNRESOLVED
        left = const_eval(expr.left, ctx)
        right = const_eval(expr.right, ctx)
        if left is _UNRESOLVED or right is _UNRESOLVED:
            return _UNRESOLVED
        try:
            return arith(expr.op, left, right)
        except (AssertionError, EvalError):
            return _UNRESOLVED
    return _UNRESOLVED


def is_resolved(value) -> bool:
    return value is not _UNRESOLVED
