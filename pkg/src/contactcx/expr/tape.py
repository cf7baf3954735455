"""Flattening of expression ASTs into linear evaluation tapes.

A tape is a straight-line program over value/gradient/Hessian registers.  The
flattener performs value-numbering CSE (identical sub-programs evaluate once)
and liveness-based register reuse so large composed potentials keep a small
working set.  Both kernel backends execute the same tape in the same order,
which pins the floating-point semantics of a tape independent of backend.

Evaluation modes:
    MODE_VAL  - values only
    MODE_GRAD - values + gradients
    MODE_HESS - values + gradients + packed upper-triangular Hessians
"""

from __future__ import annotations

import numpy as np

from .nodes import Add, Div, Expression, Fun, Mul, Neg, Node, Num, Pow, Sub, Var

MODE_VAL = 0
MODE_GRAD = 1
MODE_HESS = 2

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POWI = 7
OP_SIN = 8
OP_COS = 9
OP_TAN = 10
OP_EXP = 11
OP_LOG = 12
OP_SQRT = 13
OP_ABS = 14
OP_BUMP = 15
OP_WRAP = 16

_FUN_OPS = {
    "sin": OP_SIN,
    "cos": OP_COS,
    "tan": OP_TAN,
    "exp": OP_EXP,
    "log": OP_LOG,
    "sqrt": OP_SQRT,
    "abs": OP_ABS,
    "bump": OP_BUMP,
    "wrap": OP_WRAP,
}


def hess_size(n: int) -> int:
    return n * (n + 1) // 2


def hess_index(i: int, j: int, n: int) -> int:
    """Packed upper-triangular index for (i, j), i <= j."""
    return i * n - i * (i + 1) // 2 + j


def unpack_hessian(packed: np.ndarray, n: int) -> np.ndarray:
    """(..., P) packed upper triangle -> (..., n, n) symmetric matrix."""
    out = np.zeros(packed.shape[:-1] + (n, n), dtype=np.float64)
    k = 0
    for i in range(n):
        for j in range(i, n):
            out[..., i, j] = packed[..., k]
            out[..., j, i] = packed[..., k]
            k += 1
    return out


class Tape:
    """Compiled straight-line program for one or more Expressions over a scope."""

    __slots__ = ("n_vars", "ops", "arg1", "arg2", "out", "n_slots", "consts", "nodes", "scope", "results")

    def __init__(self, n_vars, ops, arg1, arg2, out, n_slots, consts, nodes, scope, results):
        self.n_vars = n_vars
        self.ops = np.asarray(ops, dtype=np.int32)
        self.arg1 = np.asarray(arg1, dtype=np.int32)
        self.arg2 = np.asarray(arg2, dtype=np.int32)
        self.out = np.asarray(out, dtype=np.int32)
        self.n_slots = n_slots
        self.consts = np.asarray(consts, dtype=np.float64)
        self.nodes = nodes  # instruction -> source Node, for error reporting
        self.scope = scope
        self.results = np.asarray(results, dtype=np.int32)  # output slots

    @property
    def n_out(self) -> int:
        return len(self.results)

    def __len__(self) -> int:
        return len(self.ops)


def _postorder(root: Node):
    """Iterative post-order with identity memo (shared subtrees visited once)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        if isinstance(node, (Neg, Fun)):
            stack.append((node.a, False))
        elif isinstance(node, Pow):
            stack.append((node.a, False))
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.append((node.b, False))
            stack.append((node.a, False))
    return order


def compile_tape(expr: Expression) -> Tape:
    """Flatten with CSE and register reuse; cached per Expression instance."""
    cache = getattr(expr, "_tape", None)
    if cache is not None:
        return cache
    tape = _compile([expr.root], expr.scope)
    object.__setattr__(expr, "_tape", tape)
    return tape


_vector_cache: dict = {}


def compile_vector(exprs) -> Tape:
    """One tape for an Expression vector; CSE shares work across components.

    Cached by component identity; the cache pins the expressions so the id
    key stays unambiguous.
    """
    exprs = exprs if isinstance(exprs, tuple) else tuple(exprs)
    key = tuple(map(id, exprs))
    hit = _vector_cache.get(key)
    if hit is not None:
        return hit[1]
    scope = exprs[0].scope
    for e in exprs[1:]:
        if e.scope != scope:
            raise ValueError("vector components must share one scope")
    tape = _compile([e.root for e in exprs], scope)
    _vector_cache[key] = (exprs, tape)
    return tape


def _compile(roots, scope) -> Tape:
    scope_index = {name: i for i, name in enumerate(scope)}
    const_index: dict = {}
    consts: list = []
    value_num: dict = {}  # structural key -> instruction index
    node_val: dict = {}  # id(node) -> instruction index
    ops, arg1, arg2, nodes = [], [], [], []

    def emit(key, op, a, b, node):
        idx = value_num.get(key)
        if idx is None:
            idx = len(ops)
            ops.append(op)
            arg1.append(a)
            arg2.append(b)
            nodes.append(node)
            value_num[key] = idx
        return idx

    order = []
    seen_ids = set()
    for root in roots:
        for node in _postorder(root):
            if id(node) not in seen_ids:
                seen_ids.add(id(node))
                order.append(node)

    for node in order:
        if isinstance(node, Num):
            v = float(node.value)
            ci = const_index.get(v)
            if ci is None:
                ci = len(consts)
                consts.append(v)
                const_index[v] = ci
            idx = emit(("c", v), OP_CONST, ci, 0, node)
        elif isinstance(node, Var):
            vi = scope_index.get(node.name)
            if vi is None:
                from ..errors import UndeclaredVariableError

                raise UndeclaredVariableError(node.name)
            idx = emit(("v", vi), OP_VAR, vi, 0, node)
        elif isinstance(node, Neg):
            a = node_val[id(node.a)]
            idx = emit((OP_NEG, a), OP_NEG, a, 0, node)
        elif isinstance(node, Pow):
            a = node_val[id(node.a)]
            idx = emit((OP_POWI, a, node.k), OP_POWI, a, node.k, node)
        elif isinstance(node, Fun):
            op = _FUN_OPS[node.name]
            a = node_val[id(node.a)]
            idx = emit((op, a), op, a, 0, node)
        else:
            op = {Add: OP_ADD, Sub: OP_SUB, Mul: OP_MUL, Div: OP_DIV}[type(node)]
            a = node_val[id(node.a)]
            b = node_val[id(node.b)]
            idx = emit((op, a, b), op, a, b, node)
        node_val[id(node)] = idx

    result_vals = [node_val[id(root)] for root in roots]
    n_instr = len(ops)
    # liveness: last instruction reading each value
    last_use = list(range(n_instr))
    for i in range(n_instr):
        op = ops[i]
        if op >= OP_ADD:
            last_use[arg1[i]] = i
            if op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
                last_use[arg2[i]] = i
    for rv in result_vals:
        last_use[rv] = n_instr  # keep every result alive

    slot_of = [0] * n_instr
    free: list = []
    n_slots = 0
    # rewrite operand references from value ids to slots
    r_arg1 = list(arg1)
    r_arg2 = list(arg2)
    for i in range(n_instr):
        op = ops[i]
        if op >= OP_ADD:
            r_arg1[i] = slot_of[arg1[i]]
            if op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
                r_arg2[i] = slot_of[arg2[i]]
        if free:
            slot_of[i] = free.pop()
        else:
            slot_of[i] = n_slots
            n_slots += 1
        # operands freed after output allocation: outputs never alias inputs
        if op >= OP_ADD:
            if last_use[arg1[i]] == i:
                free.append(slot_of[arg1[i]])
            if op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV) and arg2[i] != arg1[i]:
                if last_use[arg2[i]] == i:
                    free.append(slot_of[arg2[i]])

    return Tape(
        n_vars=len(scope),
        ops=ops,
        arg1=r_arg1,
        arg2=r_arg2,
        out=[slot_of[i] for i in range(n_instr)],
        n_slots=n_slots,
        consts=consts if consts else [0.0],
        nodes=nodes,
        scope=tuple(scope),
        results=[slot_of[rv] for rv in result_vals],
    )
