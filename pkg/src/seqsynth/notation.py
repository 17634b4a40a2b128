"""Human-readable symbolic notation for programs.

Binary operators print infix with explicit parentheses around compound
operands, conditionals as ``if a <= 0 then b else c``, and the looping
forms as ``loop (f) a b``, ``loop2 (f) (g) a b c`` and ``compr (f) a``.
The parser accepts exactly what the printer emits (plus redundant
parentheses), so display strings round-trip.
"""

from __future__ import annotations

import re

from .lang import (
    COMPR,
    COND,
    DIV,
    LOOP,
    LOOP2,
    MINUS,
    MOD,
    OP_NAMES,
    PLUS,
    TIMES,
    VARX,
    VARY,
    ZERO,
    ONE,
    TWO,
    Expr,
    expr,
)

_BINOPS = {PLUS: "+", MINUS: "-", TIMES: "*", DIV: "div", MOD: "mod"}
_BINOP_BY_NAME = {v: k for k, v in _BINOPS.items()}
_ATOM_OPS = (ZERO, ONE, TWO, VARX, VARY)


class NotationError(Exception):
    pass


def _paren(e: Expr) -> str:
    s = to_symbolic(e)
    return s if e.op in _ATOM_OPS else f"({s})"


def to_symbolic(e: Expr) -> str:
    op = e.op
    if op in _ATOM_OPS:
        return OP_NAMES[op]
    if op in _BINOPS:
        a, b = e.args
        return f"{_paren(a)} {_BINOPS[op]} {_paren(b)}"
    if op == COND:
        a, b, c = e.args
        return f"if {_paren(a)} <= 0 then {_paren(b)} else {_paren(c)}"
    if op == LOOP:
        f, a, b = e.args
        return f"loop ({to_symbolic(f)}) {_paren(a)} {_paren(b)}"
    if op == LOOP2:
        f, g, a, b, c = e.args
        return f"loop2 ({to_symbolic(f)}) ({to_symbolic(g)}) {_paren(a)} {_paren(b)} {_paren(c)}"
    if op == COMPR:
        f, a = e.args
        return f"compr ({to_symbolic(f)}) {_paren(a)}"
    raise NotationError(f"unprintable operator {op}")


_TOKEN_RE = re.compile(r"\s*(<=|[()+\-*]|\d+|[A-Za-z]\w*)")

_KEYWORDS = {"loop", "loop2", "compr", "if", "then", "else", "div", "mod", "x", "y"}


def _lex(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise NotationError(f"bad character at {pos}: {text[pos:pos + 10]!r}")
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise NotationError("unexpected end of input")
        if expected is not None and tok != expected:
            raise NotationError(f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def parse_expr(self) -> Expr:
        left = self.parse_primary()
        while self.peek() in ("+", "-", "*", "div", "mod"):
            op = _BINOP_BY_NAME[self.take()]
            right = self.parse_primary()
            left = expr(op, left, right)
        return left

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok == "(":
            self.take()
            inner = self.parse_expr()
            self.take(")")
            return inner
        if tok == "x":
            self.take()
            return expr(VARX)
        if tok == "y":
            self.take()
            return expr(VARY)
        if tok == "if":
            self.take()
            a = self.parse_expr()
            self.take("<=")
            if self.take() != "0":
                raise NotationError("conditional must compare against 0")
            self.take("then")
            b = self.parse_expr()
            self.take("else")
            c = self.parse_expr()
            return expr(COND, a, b, c)
        if tok == "loop":
            self.take()
            return expr(LOOP, *(self.parse_primary() for _ in range(3)))
        if tok == "loop2":
            self.take()
            return expr(LOOP2, *(self.parse_primary() for _ in range(5)))
        if tok == "compr":
            self.take()
            return expr(COMPR, *(self.parse_primary() for _ in range(2)))
        if tok is not None and tok.isdigit():
            self.take()
            value = int(tok)
            if value in (0, 1, 2):
                return expr((ZERO, ONE, TWO)[value])
            raise NotationError(f"only the constants 0, 1 and 2 exist; got {value}")
        raise NotationError(f"unexpected token {tok!r}")


def from_symbolic(text: str) -> Expr:
    parser = _Parser(_lex(text))
    e = parser.parse_expr()
    if parser.peek() is not None:
        raise NotationError(f"trailing input from token {parser.pos}: {parser.peek()!r}")
    return e
