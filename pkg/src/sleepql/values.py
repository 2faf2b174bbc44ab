"""Typed value lattice shared by the store, the query language and the responder.

Every cell flowing through the engine is one of a small set of Python types:

===========  ======================  =========================================
value type   Python representation   notes
===========  ======================  =========================================
INT          int                     counts; bounded to signed 64-bit
FLOAT        float                   64-bit
TEXT         str                     also carries ISO calendar dates
TIMESTAMP    datetime (aware, UTC)   microsecond precision
TIMESPAN     timedelta               signed, microsecond precision
BOOL         bool
NULL         None
===========  ======================  =========================================

Calendar dates are represented as TEXT in ``YYYY-MM-DD`` form; lexicographic
order on that form equals chronological order, so date columns participate in
ordinary text comparisons.

Comparisons between mismatched types are rejected (INT widens to FLOAT, which
is exact at the magnitudes stored here); nothing is coerced silently.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Union

Value = Union[int, float, str, datetime, timedelta, bool, None]

INT64_MAX = 2**63 - 1
INT64_MIN = -(2**63)


class ValueType(Enum):
    INT = "int"
    FLOAT = "float"
    TEXT = "text"
    TIMESTAMP = "timestamp"
    TIMESPAN = "timespan"
    BOOL = "bool"
    NULL = "null"


class TypeError_(Exception):
    """A value failed a type check (mismatched comparison, bad arithmetic)."""


def type_of(value: Value) -> ValueType:
    # bool before int: bool is an int subclass in Python
    if value is None:
        return ValueType.NULL
    if isinstance(value, bool):
        return ValueType.BOOL
    if isinstance(value, int):
        return ValueType.INT
    if isinstance(value, float):
        return ValueType.FLOAT
    if isinstance(value, str):
        return ValueType.TEXT
    if isinstance(value, datetime):
        return ValueType.TIMESTAMP
    if isinstance(value, timedelta):
        return ValueType.TIMESPAN
    raise TypeError_(f"unsupported value: {value!r}")


_NUMERIC = {ValueType.INT, ValueType.FLOAT}


def unify(a: ValueType, b: ValueType) -> ValueType:
    """Common type of two operands, or raise. INT/FLOAT unify to FLOAT."""
    if a == b:
        return a
    if a in _NUMERIC and b in _NUMERIC:
        return ValueType.FLOAT
    if ValueType.NULL in (a, b):
        return a if b == ValueType.NULL else b
    raise TypeError_(f"type mismatch: {a.value} vs {b.value}")


def comparable(a: ValueType, b: ValueType) -> bool:
    try:
        unify(a, b)
    except TypeError_:
        return False
    return True


def check_int64(n: int) -> int:
    if n > INT64_MAX or n < INT64_MIN:
        raise TypeError_(f"integer overflow: {n}")
    return n


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0,
        second: int = 0, microsecond: int = 0) -> datetime:
    return datetime(year, month, day, hour, minute, second, microsecond,
                    tzinfo=timezone.utc)


def from_epoch(seconds: float) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def iso_date(d: date) -> str:
    return d.isoformat()


def parse_iso_date(text: str) -> date:
    return date.fromisoformat(text)


def format_cell(value: Value) -> str:
    """Human-readable cell text for rendered result tables."""
    t = type_of(value)
    if t == ValueType.NULL:
        return "null"
    if t == ValueType.BOOL:
        return "true" if value else "false"
    if t == ValueType.TIMESTAMP:
        return value.astimezone(timezone.utc).isoformat()
    if t == ValueType.FLOAT:
        return f"{value:g}"
    return str(value)
