"""Recursive-descent parser for coefficient expressions.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" ["-"|"+"] integer)?
    base   := number | ident | func "(" expr ")" | "(" expr ")" | "-" base

Unary minus binds tighter than ``^``, so ``-x1^2`` is ``(-x1)^2``.
"""
from __future__ import annotations

import re

from .expr import ADD, CALL, CONST, DIV, FUNCS, MUL, NEG, POW, SUB, VAR, Expr

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_INT = re.compile(r"\d+")


class ExprSyntaxError(ValueError):
    def __init__(self, msg, offset, src=""):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset
        self.src = src


class UnknownIdentifierError(ValueError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class _Parser:
    def __init__(self, src, names):
        self.src = src
        # byte offsets are reported, so track a utf-8 view alongside
        self.pos = 0
        self.names = names

    def err(self, msg, pos=None):
        p = self.pos if pos is None else pos
        return ExprSyntaxError(msg, len(self.src[:p].encode("utf-8")), self.src)

    def skip(self):
        s = self.src
        n = len(s)
        while self.pos < n and s[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def expect(self, ch):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise self.err(f"expected {ch!r}, got {got!r}")
        self.pos += 1

    def parse(self):
        if not self.src.strip():
            raise self.err("empty expression", 0)
        e = self.expr()
        if self.peek():
            raise self.err(f"unexpected {self.peek()!r}")
        return e

    def expr(self):
        left = self.term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                left = Expr.raw(ADD, (left, self.term()))
            elif c == "-":
                self.pos += 1
                left = Expr.raw(SUB, (left, self.term()))
            else:
                return left

    def term(self):
        left = self.factor()
        while True:
            c = self.peek()
            if c == "*":
                self.pos += 1
                left = Expr.raw(MUL, (left, self.factor()))
            elif c == "/":
                self.pos += 1
                left = Expr.raw(DIV, (left, self.factor()))
            else:
                return left

    def factor(self):
        b = self.base()
        if self.peek() == "^":
            self.pos += 1
            sign = 1
            c = self.peek()
            if c in "+-" and c:
                sign = -1 if c == "-" else 1
                self.pos += 1
                self.skip()
            m = _INT.match(self.src, self.pos)
            if not m:
                raise self.err("expected integer exponent")
            self.pos = m.end()
            return Expr.raw(POW, (b,), sign * int(m.group()))
        return b

    def base(self):
        c = self.peek()
        if not c:
            raise self.err("unexpected end of input")
        if c == "-":
            self.pos += 1
            return Expr.raw(NEG, (self.base(),))
        if c == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Expr.raw(CONST, (), float(m.group()))
        m = _IDENT.match(self.src, self.pos)
        if m:
            name = m.group()
            start = self.pos
            self.pos = m.end()
            if name in FUNCS and self.peek() == "(":
                self.pos += 1
                arg = self.expr()
                self.expect(")")
                return Expr.raw(CALL, (arg,), name)
            if name not in self.names:
                raise UnknownIdentifierError(name, len(self.src[:start].encode("utf-8")))
            return Expr.raw(VAR, (), name)
        raise self.err(f"unexpected {c!r}")


def parse_expr(src: str, chart=None, extra_symbols=()) -> Expr:
    """Parse ``src`` into an expression tree.

    Identifiers must be coordinate names of ``chart`` or listed in
    ``extra_symbols``.  ``chart`` may be a Chart or a plain list of names.
    """
    if chart is None:
        names = set()
    elif hasattr(chart, "coord_names"):
        names = set(chart.coord_names)
    else:
        names = set(chart)
    names |= set(extra_symbols)
    return _Parser(src, names).parse()
