"""Recursive-descent parser for the expression DSL.

Grammar (standard precedence, ^ > unary - > *,/ > +,-; binaries left-assoc):

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)*
    exponent := ['-'] INT | '(' ['-'] INT ')'
    atom     := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Exponents must be integer literals; numbers accept scientific notation.
"""

from __future__ import annotations

import re

from ..errors import ExprSyntaxError, UndeclaredVariableError
from .nodes import FUNCTIONS, Add, Div, Expression, Fun, Mul, Neg, Node, Num, Pow, Sub, Var

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_INT = re.compile(r"^\d+$")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.toks = []  # (kind, value, position)
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                at = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(f"unexpected character {text[at]!r}", at)
            if m.group("num") is not None:
                self.toks.append(("num", m.group("num"), m.start("num")))
            elif m.group("ident") is not None:
                self.toks.append(("ident", m.group("ident"), m.start("ident")))
            else:
                self.toks.append(("op", m.group("op"), m.start("op")))
            pos = m.end()
        self.toks.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected '{op}'", pos)
        return self.next()


def parse(text: str, scope) -> Expression:
    """Parse ``text`` over the declared variable scope.

    Raises ExprSyntaxError (position-annotated), UndeclaredVariableError, and
    rejects '^' whose exponent is not an integer literal.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    scope = tuple(scope)
    toks = _Tokens(text)
    node = _expr(toks, scope)
    kind, val, pos = toks.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {val!r}", pos)
    return Expression(node, scope)


def _expr(toks, scope) -> Node:
    node = _term(toks, scope)
    while True:
        kind, val, _ = toks.peek()
        if kind == "op" and val in "+-":
            toks.next()
            rhs = _term(toks, scope)
            node = Add(node, rhs) if val == "+" else Sub(node, rhs)
        else:
            return node


def _term(toks, scope) -> Node:
    node = _unary(toks, scope)
    while True:
        kind, val, _ = toks.peek()
        if kind == "op" and val in "*/":
            toks.next()
            rhs = _unary(toks, scope)
            node = Mul(node, rhs) if val == "*" else Div(node, rhs)
        else:
            return node


def _unary(toks, scope) -> Node:
    kind, val, _ = toks.peek()
    if kind == "op" and val == "-":
        toks.next()
        inner = _unary(toks, scope)
        # fold a sign applied directly to a literal into the literal
        if isinstance(inner, Num):
            return Num(-inner.value)
        return Neg(inner)
    return _power(toks, scope)


def _power(toks, scope) -> Node:
    node = _atom(toks, scope)
    while True:
        kind, val, _ = toks.peek()
        if kind == "op" and val == "^":
            toks.next()
            node = Pow(node, _exponent(toks))
        else:
            return node


def _exponent(toks) -> int:
    kind, val, pos = toks.peek()
    if kind == "op" and val == "(":
        toks.next()
        k = _signed_int(toks)
        toks.expect_op(")")
        return k
    return _signed_int(toks)


def _signed_int(toks) -> int:
    sign = 1
    kind, val, pos = toks.peek()
    if kind == "op" and val == "-":
        toks.next()
        sign = -1
        kind, val, pos = toks.peek()
    if kind != "num" or not _INT.match(val):
        raise ExprSyntaxError("exponent must be an integer literal", pos)
    toks.next()
    return sign * int(val)


def _atom(toks, scope) -> Node:
    kind, val, pos = toks.next()
    if kind == "num":
        return Num(float(val))
    if kind == "ident":
        nkind, nval, _ = toks.peek()
        if nkind == "op" and nval == "(":
            if val not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function '{val}'", pos)
            toks.next()
            arg = _expr(toks, scope)
            toks.expect_op(")")
            return Fun(val, arg)
        if val not in scope:
            raise UndeclaredVariableError(val, pos)
        return Var(val)
    if kind == "op" and val == "(":
        node = _expr(toks, scope)
        toks.expect_op(")")
        return node
    raise ExprSyntaxError(f"unexpected token {val!r}" if val else "unexpected end of input", pos)
