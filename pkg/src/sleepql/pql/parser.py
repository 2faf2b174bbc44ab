"""Recursive-descent parser producing a QueryPlan or diagnostics.

Binary operators parse left-associative with the usual precedence
(or < and < comparison < additive < multiplicative). ``datetime("...")``
folds to a timestamp literal so printed plans re-parse losslessly. On a
stage-level error the parser skips to the next ``|`` and keeps going,
reporting up to 5 diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .ast import (Aggregation, BinaryOp, Column, CountStage, Expr, Extend,
                  FuncCall, Literal, Project, QueryPlan, Sort, Stage,
                  Summarize, Take, Where, parse_timestamp_literal)
from .diagnostics import Diagnostic, ERROR, SYNTAX
from .lexer import (COMMA, DURATION, EOF, IDENT, KEYWORD, LPAREN, NUMBER, OP,
                    PIPE, RPAREN, STRING, LexError, Token, tokenize)

MAX_DIAGNOSTICS = 5

AGGREGATION_FUNCS = ("sum", "avg", "min", "max", "count")


@dataclass
class ParseResult:
    plan: Optional[QueryPlan]
    diagnostics: list[Diagnostic]
    # source byte range of each stage, parallel to plan.stages (when plan is set)
    stage_spans: tuple[tuple[int, int], ...] = ()

    @property
    def ok(self) -> bool:
        return self.plan is not None and not self.diagnostics


class _ParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.stage_spans: tuple[tuple[int, int], ...] = ()

    # -- token helpers -----------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def check(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.current
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.check(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> Token:
        if self.check(kind, text):
            return self.advance()
        tok = self.current
        expected = what or text or kind.lower()
        found = tok.text or "end of input"
        raise _ParseError(Diagnostic(ERROR, SYNTAX, tok.span,
                                     f"expected {expected}, found {found!r}"))

    def error(self, message: str, span: Optional[tuple[int, int]] = None) -> _ParseError:
        return _ParseError(Diagnostic(ERROR, SYNTAX, span or self.current.span, message))

    # -- grammar -----------------------------------------------------------

    def parse_query(self) -> Optional[QueryPlan]:
        if self.current.kind == EOF:
            self.diagnostics.append(
                Diagnostic(ERROR, SYNTAX, self.current.span, "expected table identifier"))
            return None
        try:
            source = self.expect(IDENT, what="table identifier")
        except _ParseError as exc:
            self.diagnostics.append(exc.diagnostic)
            return None
        stages: list[Stage] = []
        spans: list[tuple[int, int]] = []
        broken = False
        while self.accept(PIPE):
            start = self.current.span[0]
            try:
                stages.append(self.parse_stage())
                end = self.tokens[self.pos - 1].span[1] if self.pos > 0 else start
                spans.append((start, end))
            except _ParseError as exc:
                broken = True
                if len(self.diagnostics) < MAX_DIAGNOSTICS:
                    self.diagnostics.append(exc.diagnostic)
                self.skip_to_pipe()
        if self.current.kind != EOF:
            broken = True
            if len(self.diagnostics) < MAX_DIAGNOSTICS:
                self.diagnostics.append(Diagnostic(
                    ERROR, SYNTAX, self.current.span,
                    f"unexpected {self.current.text!r} after stage"))
            self.skip_to_pipe()
            while self.accept(PIPE):
                try:
                    stages.append(self.parse_stage())
                except _ParseError as exc:
                    if len(self.diagnostics) < MAX_DIAGNOSTICS:
                        self.diagnostics.append(exc.diagnostic)
                    self.skip_to_pipe()
        if broken or self.diagnostics:
            return None
        self.stage_spans = tuple(spans)
        return QueryPlan(source=source.text, stages=tuple(stages))

    def skip_to_pipe(self) -> None:
        while self.current.kind not in (PIPE, EOF):
            self.advance()

    def parse_stage(self) -> Stage:
        tok = self.current
        if tok.kind != KEYWORD:
            raise self.error(f"expected stage keyword, found {tok.text!r}")
        if tok.text == "where":
            self.advance()
            return Where(self.parse_expr())
        if tok.text == "summarize":
            self.advance()
            return self.parse_summarize()
        if tok.text == "extend":
            self.advance()
            name = self.expect(IDENT, what="column name")
            self.expect(OP, "==", what="'='")
            return Extend(name.text, self.parse_expr())
        if tok.text == "project":
            self.advance()
            columns = [self.expect(IDENT, what="column name").text]
            while self.accept(COMMA):
                columns.append(self.expect(IDENT, what="column name").text)
            return Project(tuple(columns))
        if tok.text == "sort":
            self.advance()
            self.expect(KEYWORD, "by", what="'by'")
            column = self.expect(IDENT, what="column name")
            descending = False
            if self.accept(KEYWORD, "desc"):
                descending = True
            else:
                self.accept(KEYWORD, "asc")
            return Sort(column.text, descending)
        if tok.text == "take":
            self.advance()
            n = self.expect(NUMBER, what="row count")
            if not isinstance(n.value, int) or n.value < 0:
                raise self.error("take expects a non-negative integer", n.span)
            return Take(n.value)
        if tok.text == "count":
            self.advance()
            return CountStage()
        raise self.error(f"unknown stage {tok.text!r}")

    def parse_summarize(self) -> Summarize:
        aggregations = [self.parse_aggregation()]
        while self.accept(COMMA):
            aggregations.append(self.parse_aggregation())
        by: tuple[str, ...] = ()
        if self.accept(KEYWORD, "by"):
            cols = [self.expect(IDENT, what="column name").text]
            while self.accept(COMMA):
                cols.append(self.expect(IDENT, what="column name").text)
            by = tuple(cols)
        return Summarize(tuple(aggregations), by)

    def parse_aggregation(self) -> Aggregation:
        # "count" lexes as a stage keyword but is also a valid aggregation
        name = self.accept(KEYWORD, "count") or self.expect(
            IDENT, what="aggregation function")
        if name.text not in AGGREGATION_FUNCS:
            raise self.error(f"unknown aggregation {name.text!r}", name.span)
        self.expect(LPAREN, what="'('")
        column: Optional[str] = None
        if not self.check(RPAREN):
            column = self.expect(IDENT, what="column name").text
        self.expect(RPAREN, what="')'")
        if name.text == "count" and column is not None:
            raise self.error("count() takes no argument", name.span)
        if name.text != "count" and column is None:
            raise self.error(f"{name.text}() needs a column argument", name.span)
        return Aggregation(name.text, column)

    # expressions, precedence-climbing ------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.accept(KEYWORD, "or"):
            left = BinaryOp("or", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_comparison()
        while self.accept(KEYWORD, "and"):
            left = BinaryOp("and", left, self.parse_comparison())
        return left

    def parse_comparison(self) -> Expr:
        left = self.parse_additive()
        tok = self.current
        if tok.kind == OP and tok.text in ("==", "!=", "<", "<=", ">", ">="):
            self.advance()
            return BinaryOp(tok.text, left, self.parse_additive())
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.current.kind == OP and self.current.text in ("+", "-"):
            op = self.advance().text
            left = BinaryOp(op, left, self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_primary()
        while self.current.kind == OP and self.current.text in ("*", "/"):
            op = self.advance().text
            left = BinaryOp(op, left, self.parse_primary())
        return left

    def parse_primary(self) -> Expr:
        tok = self.current
        if tok.kind == NUMBER or tok.kind == DURATION:
            self.advance()
            return Literal(tok.value)
        if tok.kind == STRING:
            self.advance()
            return Literal(tok.value)
        if tok.kind == OP and tok.text == "-":
            self.advance()
            inner = self.current
            if inner.kind in (NUMBER, DURATION):
                self.advance()
                return Literal(-inner.value)
            raise self.error("expected a numeric literal after '-'", inner.span)
        if tok.kind == KEYWORD and tok.text in ("true", "false"):
            self.advance()
            return Literal(tok.text == "true")
        if tok.kind == KEYWORD and tok.text == "null":
            self.advance()
            return Literal(None)
        if tok.kind == LPAREN:
            self.advance()
            inner = self.parse_expr()
            self.expect(RPAREN, what="')'")
            return inner
        if tok.kind == IDENT:
            self.advance()
            if self.accept(LPAREN):
                args: list[Expr] = []
                if not self.check(RPAREN):
                    args.append(self.parse_expr())
                    while self.accept(COMMA):
                        args.append(self.parse_expr())
                self.expect(RPAREN, what="')'")
                return self.fold_call(tok, tuple(args))
            return Column(tok.text)
        raise self.error(f"expected expression, found {tok.text or 'end of input'!r}")

    def fold_call(self, name: Token, args: tuple[Expr, ...]) -> Expr:
        # datetime("...") is the printed form of a timestamp literal
        if name.text == "datetime":
            if len(args) == 1 and isinstance(args[0], Literal) and isinstance(args[0].value, str):
                try:
                    return Literal(parse_timestamp_literal(args[0].value))
                except ValueError:
                    raise self.error(f"bad timestamp literal {args[0].value!r}", name.span)
            raise self.error("datetime() takes one ISO timestamp string", name.span)
        return FuncCall(name.text, args)


def parse(text: str) -> ParseResult:
    """Parse query text; ``plan`` is None whenever diagnostics are present."""
    try:
        tokens = tokenize(text)
    except LexError as exc:
        return ParseResult(None, [exc.diagnostic])
    parser = _Parser(tokens)
    plan = parser.parse_query()
    return ParseResult(plan, parser.diagnostics, parser.stage_spans)
