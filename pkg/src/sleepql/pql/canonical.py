"""Canonical normal form for validated plans.

Two plans expressing the same intent canonicalize to identical text, which
is what the intent-match metric compares. The normal form:

* resolves time functions and constant arithmetic against a fixed clock, so
  relative phrasing (``ago(7d)``) and absolute bounds meet on equal terms;
* rewrites ``between(x, lo, hi)`` into its two comparisons;
* merges consecutive ``where`` stages and sorts the flattened conjuncts;
* sorts aggregation lists and group-by columns.

Stage order is otherwise preserved; canonicalization never changes what a
plan computes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (BinaryOp, Column, Expr, Extend, FuncCall, Literal,
                  QueryPlan, Stage, Summarize, Where, print_expr, print_plan)
from .context import EvalContext
from .timefns import const_eval, is_resolved
from .validate import ValidatedPlan


@dataclass(frozen=True)
class CanonicalForm:
    plan: QueryPlan
    text: str


def canonicalize(vplan: ValidatedPlan, ctx: EvalContext) -> CanonicalForm:
    plan = vplan.plan
    stages: list[Stage] = []
    for stage in plan.stages:
        if isinstance(stage, Where):
            expr = _normalize_expr(stage.expr, ctx)
            if stages and isinstance(stages[-1], Where):
                prev = stages.pop()
                expr = BinaryOp("and", prev.expr, expr)
            stages.append(Where(_sort_conjuncts(expr)))
        elif isinstance(stage, Summarize):
            aggs = tuple(sorted(stage.aggregations,
                                key=lambda a: (a.func, a.column or "")))
            stages.append(Summarize(aggs, tuple(sorted(stage.by))))
        elif isinstance(stage, Extend):
            stages.append(Extend(stage.name, _normalize_expr(stage.expr, ctx)))
        else:
            stages.append(stage)
    canonical = QueryPlan(plan.source, tuple(stages))
    return CanonicalForm(canonical, print_plan(canonical))


def _normalize_expr(expr: Expr, ctx: EvalContext) -> Expr:
    expr = _fold(expr, ctx)
    expr = _rewrite_between(expr)
    return expr


def _fold(expr: Expr, ctx: EvalContext) -> Expr:
    value = const_eval(expr, ctx)
    if is_resolved(value) and not isinstance(expr, Literal):
        return Literal(value)
    if isinstance(expr, BinaryOp):
        return BinaryOp(expr.op, _fold(expr.left, ctx), _fold(expr.right, ctx))
    if isinstance(expr, FuncCall):
        return FuncCall(expr.name, tuple(_fold(a, ctx) for a in expr.args))
    return expr


def _rewrite_between(expr: Expr) -> Expr:
    if isinstance(expr, FuncCall):
        if expr.name == "between" and len(expr.args) == 3:
            x, lo, hi = (_rewrite_between(a) for a in expr.args)
            return BinaryOp("and", BinaryOp(">=", x, lo), BinaryOp("<=", x, hi))
        return FuncCall(expr.name, tuple(_rewrite_between(a) for a in expr.args))
    if isinstance(expr, BinaryOp):
        return BinaryOp(expr.op, _rewrite_between(expr.left),
                        _rewrite_between(expr.right))
    return expr


def _sort_conjuncts(expr: Expr) -> Expr:
    conjuncts = sorted(_flatten_and(expr), key=print_expr)
    out = conjuncts[0]
    for c in conjuncts[1:]:
        out = BinaryOp("and", out, c)
    return out


def _flatten_and(expr: Expr) -> list[Expr]:
    if isinstance(expr, BinaryOp) and expr.op == "and":
        return _flatten_and(expr.left) + _flatten_and(expr.right)
    return [expr]
