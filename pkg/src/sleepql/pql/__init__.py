"""Pipeline query language: parse, validate, canonicalize, evaluate."""

from .ast import (Aggregation, BinaryOp, Column, CountStage, Expr, Extend,
                  FuncCall, Literal, Project, QueryPlan, Sort, Stage,
                  Summarize, Take, Where, print_expr, print_plan)
from .canonical import CanonicalForm, canonicalize
from .context import EvalContext
from .diagnostics import (Diagnostic, ERROR, FILTER_AFTER_AGGREGATE,
                          FUTURE_RANGE, SYNTAX, WARNING)
from .evaluate import QueryResult, evaluate
from .parser import ParseResult, parse
from .timefns import EvalError
from .validate import ValidatedPlan, ValidationResult, validate

__all__ = [
    "Aggregation", "BinaryOp", "CanonicalForm", "Column", "CountStage",
    "Diagnostic", "ERROR", "EvalContext", "EvalError", "Expr", "Extend",
    "FILTER_AFTER_AGGREGATE", "FUTURE_RANGE", "FuncCall", "Literal",
    "ParseResult", "Project", "QueryPlan", "QueryResult", "SYNTAX", "Sort",
    "Stage", "Summarize", "Take", "ValidatedPlan", "ValidationResult",
    "WARNING", "Where", "canonicalize", "evaluate", "parse", "print_expr",
    "print_plan", "validate",
]
