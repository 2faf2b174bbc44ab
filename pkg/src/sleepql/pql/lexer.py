"""Tokenizer for the pipeline query language.

Whitespace-insensitive; keywords are case-insensitive, identifiers are
case-sensitive. Duration literals are an integer immediately followed by a
unit suffix (``7d``, ``12h``, ``30m``, ``45s``, ``250ms``, ``10us``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import timedelta

from .diagnostics import Diagnostic, ERROR, SYNTAX

# token kinds
PIPE = "PIPE"
LPAREN = "LPAREN"
RPAREN = "RPAREN"
COMMA = "COMMA"
OP = "OP"            # == != < <= > >= + - * / =
IDENT = "IDENT"
KEYWORD = "KEYWORD"
NUMBER = "NUMBER"    # int or float literal
STRING = "STRING"
DURATION = "DURATION"
EOF = "EOF"

KEYWORDS = frozenset({
    "where", "summarize", "by", "extend", "project", "sort", "take", "count",
    "asc", "desc", "and", "or", "true", "false", "null",
})

_DURATION_UNITS = {"d": 86400.0, "h": 3600.0, "m": 60.0, "s": 1.0,
                   "ms": 1e-3, "us": 1e-6}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<duration>\d+(?:ms|us|[dhms])\b)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op>==|!=|<=|>=|<|>|=|\+|-|\*|/)
  | (?P<pipe>\|)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
""", re.VERBOSE)

_DURATION_SPLIT = re.compile(r"^(\d+)(ms|us|[dhms])$")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: object  # parsed payload for NUMBER / STRING / DURATION
    span: tuple[int, int]


class LexError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


def _unescape(raw: str) -> str:
    # raw includes the surrounding quotes
    return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(Diagnostic(ERROR, SYNTAX, (pos, pos + 1),
                                      f"unexpected character {text[pos]!r}"))
        span = (m.start(), m.end())
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        raw = m.group()
        if m.lastgroup == "duration":
            count, unit = _DURATION_SPLIT.match(raw).groups()
            value = timedelta(seconds=int(count) * _DURATION_UNITS[unit])
            tokens.append(Token(DURATION, raw, value, span))
        elif m.lastgroup == "number":
            value = float(raw) if ("." in raw or "e" in raw or "E" in raw) else int(raw)
            tokens.append(Token(NUMBER, raw, value, span))
        elif m.lastgroup == "ident":
            folded = raw.casefold()
            if folded in KEYWORDS:
                tokens.append(Token(KEYWORD, folded, folded, span))
            else:
                tokens.append(Token(IDENT, raw, raw, span))
        elif m.lastgroup == "string":
            tokens.append(Token(STRING, raw, _unescape(raw), span))
        elif m.lastgroup == "op":
            op = "==" if raw == "=" else raw
            tokens.append(Token(OP, op, raw, span))
        elif m.lastgroup == "pipe":
            tokens.append(Token(PIPE, raw, raw, span))
        elif m.lastgroup == "lparen":
            tokens.append(Token(LPAREN, raw, raw, span))
        elif m.lastgroup == "rparen":
            tokens.append(Token(RPAREN, raw, raw, span))
        elif m.lastgroup == "comma":
            tokens.append(Token(COMMA, raw, raw, span))
        pos = m.end()
    tokens.append(Token(EOF, "", None, (n, n)))
    return tokens
