"""Expression AST: immutable nodes, serialization, substitution, symbolic derivative.

Expressions are scalar fields over a declared variable scope. Exact first and
second derivatives are obtained numerically through the jet tape (see tape.py);
the symbolic derivative here is used where a derivative is needed *as a new
Expression* (coefficient fields of pulled-back forms, generators, d^c of
closed-form potentials).
"""

from __future__ import annotations

from dataclasses import dataclass



# Function names accepted by the DSL.  `bump` and `wrap` extend the analytic
# set: a smooth compactly-supported cutoff and a (-pi, pi] angle reduction,
# both needed by partition-of-unity construction on (periodic) charts.
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "bump", "wrap")


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Node):
    __slots__ = ("name",)
    name: str


@dataclass(frozen=True)
class Num(Node):
    __slots__ = ("value",)
    value: float

    def __post_init__(self):
        # normalize -0.0: the parser cannot produce it, so a signed-zero
        # literal would never survive a serialize/parse round trip
        if self.value == 0.0:
            object.__setattr__(self, "value", 0.0)


@dataclass(frozen=True)
class Neg(Node):
    __slots__ = ("a",)
    a: Node


@dataclass(frozen=True)
class Add(Node):
    __slots__ = ("a", "b")
    a: Node
    b: Node


@dataclass(frozen=True)
class Sub(Node):
    __slots__ = ("a", "b")
    a: Node
    b: Node


@dataclass(frozen=True)
class Mul(Node):
    __slots__ = ("a", "b")
    a: Node
    b: Node


@dataclass(frozen=True)
class Div(Node):
    __slots__ = ("a", "b")
    a: Node
    b: Node


@dataclass(frozen=True)
class Pow(Node):
    """Power with a constant integer exponent."""

    __slots__ = ("a", "k")
    a: Node
    k: int


@dataclass(frozen=True)
class Fun(Node):
    __slots__ = ("name", "a")
    name: str
    a: Node


# precedence levels used by the printer (higher binds tighter)
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(n: Node) -> int:
    if isinstance(n, (Var, Num, Fun)):
        return _PREC_ATOM
    if isinstance(n, Pow):
        return _PREC_POW
    if isinstance(n, Neg):
        return _PREC_NEG
    if isinstance(n, (Mul, Div)):
        return _PREC_MUL
    return _PREC_ADD


def _num_str(v: float) -> str:
    return repr(float(v))


def serialize(n: Node) -> str:
    """Render with minimal parentheses; reparsing yields a structurally identical AST."""
    if isinstance(n, Var):
        return n.name
    if isinstance(n, Num):
        s = _num_str(n.value)
        if s.startswith("-"):
            # a bare negative literal (including -0.0) would reparse as Neg(Num)
            return f"({s})"
        return s
    if isinstance(n, Fun):
        return f"{n.name}({serialize(n.a)})"
    if isinstance(n, Neg):
        inner = serialize(n.a)
        if _prec(n.a) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(n, Pow):
        base = serialize(n.a)
        if not isinstance(n.a, (Var, Num, Fun)):
            base = f"({base})"
        exp = str(n.k) if n.k >= 0 else f"({n.k})"
        return f"{base}^{exp}"
    if isinstance(n, (Add, Sub)):
        op = "+" if isinstance(n, Add) else "-"
        left = serialize(n.a)
        if _prec(n.a) < _PREC_ADD:
            left = f"({left})"
        right = serialize(n.b)
        # left-associative: right child at same level needs parens
        if _prec(n.b) <= _PREC_ADD:
            right = f"({right})"
        return f"{left} {op} {right}"
    if isinstance(n, (Mul, Div)):
        op = "*" if isinstance(n, Mul) else "/"
        left = serialize(n.a)
        if _prec(n.a) < _PREC_MUL:
            left = f"({left})"
        right = serialize(n.b)
        if _prec(n.b) <= _PREC_MUL:
            right = f"({right})"
        return f"{left}{op}{right}"
    raise TypeError(f"unknown node {n!r}")


def variables(n: Node) -> set:
    """Set of variable names appearing in the AST."""
    out = set()
    stack = [n]
    while stack:
        m = stack.pop()
        if isinstance(m, Var):
            out.add(m.name)
        elif isinstance(m, (Neg, Fun)):
            stack.append(m.a)
        elif isinstance(m, Pow):
            stack.append(m.a)
        elif isinstance(m, (Add, Sub, Mul, Div)):
            stack.append(m.a)
            stack.append(m.b)
    return out


def substitute(n: Node, table: dict) -> Node:
    """Replace Var nodes by ASTs per ``table`` (name -> Node).

    Untouched subtrees are returned as the same objects so that repeated
    compositions keep structural sharing (the tape compiler's CSE relies on it).
    """
    if isinstance(n, Var):
        return table.get(n.name, n)
    if isinstance(n, Num):
        return n
    if isinstance(n, Neg):
        a = substitute(n.a, table)
        return n if a is n.a else Neg(a)
    if isinstance(n, Fun):
        a = substitute(n.a, table)
        return n if a is n.a else Fun(n.name, a)
    if isinstance(n, Pow):
        a = substitute(n.a, table)
        return n if a is n.a else Pow(a, n.k)
    a = substitute(n.a, table)
    b = substitute(n.b, table)
    if a is n.a and b is n.b:
        return n
    return type(n)(a, b)


_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_zero(n: Node) -> bool:
    return isinstance(n, Num) and n.value == 0.0


def _add(a: Node, b: Node) -> Node:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if isinstance(a, Num) and a.value == 1.0:
        return b
    if isinstance(b, Num) and b.value == 1.0:
        return a
    return Mul(a, b)


def derive(n: Node, var: str) -> Node:
    """Exact symbolic partial derivative d n / d var.

    The derivative of ``bump`` is valid away from |t| = 1 (the true derivative
    vanishes there together with the bump itself; numeric evaluation of the
    derived AST at exactly |t| = 1 divides by zero).
    """
    if isinstance(n, Var):
        return _ONE if n.name == var else _ZERO
    if isinstance(n, Num):
        return _ZERO
    if isinstance(n, Neg):
        da = derive(n.a, var)
        return _ZERO if _is_zero(da) else Neg(da)
    if isinstance(n, Add):
        return _add(derive(n.a, var), derive(n.b, var))
    if isinstance(n, Sub):
        da, db = derive(n.a, var), derive(n.b, var)
        if _is_zero(db):
            return da
        if _is_zero(da):
            return Neg(db)
        return Sub(da, db)
    if isinstance(n, Mul):
        return _add(_mul(derive(n.a, var), n.b), _mul(n.a, derive(n.b, var)))
    if isinstance(n, Div):
        da, db = derive(n.a, var), derive(n.b, var)
        if _is_zero(db):
            return _ZERO if _is_zero(da) else Div(da, n.b)
        num = Sub(_mul(da, n.b), _mul(n.a, db))
        return Div(num, Pow(n.b, 2))
    if isinstance(n, Pow):
        da = derive(n.a, var)
        if _is_zero(da) or n.k == 0:
            return _ZERO
        if n.k == 1:
            return da
        return _mul(_mul(Num(float(n.k)), Pow(n.a, n.k - 1)), da)
    if isinstance(n, Fun):
        da = derive(n.a, var)
        if _is_zero(da):
            return _ZERO
        t = n.a
        if n.name == "sin":
            d = Fun("cos", t)
        elif n.name == "cos":
            d = Neg(Fun("sin", t))
        elif n.name == "tan":
            d = Add(_ONE, Pow(Fun("tan", t), 2))
        elif n.name == "exp":
            d = n
        elif n.name == "log":
            d = Div(_ONE, t)
        elif n.name == "sqrt":
            d = Div(Num(0.5), n)
        elif n.name == "abs":
            d = Div(n, t)  # sign(t) away from 0
        elif n.name == "wrap":
            d = _ONE
        elif n.name == "bump":
            s = Sub(_ONE, Pow(t, 2))
            d = Div(_mul(n, _mul(Num(-2.0), t)), Pow(s, 2))
        else:
            raise ValueError(f"unknown function '{n.name}'")
        return _mul(d, da)
    raise TypeError(f"unknown node {n!r}")


@dataclass(frozen=True)
class Expression:
    """A parsed scalar field: AST plus the ordered variable scope it lives in.

    Scope membership is enforced by the parser and again when a tape is
    compiled; construction itself stays O(1) so composing large potentials
    does not re-walk their trees.
    """

    root: Node
    scope: tuple

    def __str__(self) -> str:
        return serialize(self.root)

    @property
    def nvars(self) -> int:
        return len(self.scope)

    def rescope(self, scope) -> "Expression":
        """Same field viewed in a (super)scope."""
        return Expression(self.root, tuple(scope))

    def subst(self, mapping: dict, scope=None) -> "Expression":
        """Compose: replace variables by expressions (given as Expression or Node)."""
        table = {}
        for k, v in mapping.items():
            table[k] = v.root if isinstance(v, Expression) else v
        new_root = substitute(self.root, table)
        if scope is None:
            scope = self.scope
        return Expression(new_root, tuple(scope))

    def diff(self, var: str) -> "Expression":
        return Expression(derive(self.root, var), self.scope)

    # small-arithmetic helpers used by the construction code
    def _coerce(self, other):
        if isinstance(other, Expression):
            if other.scope != self.scope:
                raise ValueError("scope mismatch in expression arithmetic")
            return other.root
        return Num(float(other))

    def __add__(self, other):
        return Expression(_add(self.root, self._coerce(other)), self.scope)

    def __radd__(self, other):
        return Expression(_add(self._coerce(other), self.root), self.scope)

    def __sub__(self, other):
        return Expression(Sub(self.root, self._coerce(other)), self.scope)

    def __mul__(self, other):
        return Expression(_mul(self.root, self._coerce(other)), self.scope)

    def __rmul__(self, other):
        return Expression(_mul(self._coerce(other), self.root), self.scope)

    def __neg__(self):
        return Expression(Neg(self.root), self.scope)


def const(value: float, scope) -> Expression:
    return Expression(Num(float(value)), tuple(scope))


def var(name: str, scope) -> Expression:
    return Expression(Var(name), tuple(scope))
