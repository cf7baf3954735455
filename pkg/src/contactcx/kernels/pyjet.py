"""Pure-Python tape evaluator, vectorized with numpy over point batches.

Executes the same instruction stream as the compiled backend, with the same
per-operation arithmetic; results agree with the compiled kernel up to ULP
differences in the transcendental functions (numpy SIMD vs libm).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..expr import nodes as _nodes
from ..expr.tape import (
    MODE_GRAD,
    MODE_HESS,
    MODE_VAL,
    OP_ABS,
    OP_ADD,
    OP_BUMP,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_LOG,
    OP_MUL,
    OP_NEG,
    OP_POWI,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_TAN,
    OP_VAR,
    OP_WRAP,
    hess_size,
)

_CHUNK = 128
_TWO_PI = 2.0 * math.pi

_pack_cache: dict = {}


def _pack_indices(n: int):
    """Arrays I, J with packed index k <-> (I[k], J[k]), I <= J."""
    got = _pack_cache.get(n)
    if got is None:
        I, J = [], []
        for i in range(n):
            for j in range(i, n):
                I.append(i)
                J.append(j)
        got = (np.asarray(I), np.asarray(J))
        _pack_cache[n] = got
    return got


def _bad(tape, i, message):
    node = tape.nodes[i]
    raise DomainError(message, _nodes.serialize(node))


def evaluate(tape, X, mode=MODE_HESS, strict=True):
    """Run ``tape`` on points X (B, n_vars).

    Single-output tapes return (val (B,), grad (B, n) | None, hess (B, P) | None);
    k-output tapes return shapes (B, k), (B, k, n), (B, k, P).  P = n(n+1)/2.
    Non-strict evaluation yields NaN on domain violations instead of raising.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tape.n_vars:
        raise ValueError(f"expected points of shape (B, {tape.n_vars})")
    B = X.shape[0]
    n = tape.n_vars
    P = hess_size(n)
    k = tape.n_out
    out_v = np.empty((B, k))
    out_g = np.empty((B, k, n)) if mode >= MODE_GRAD else None
    out_h = np.empty((B, k, P)) if mode >= MODE_HESS else None
    I, J = _pack_indices(n)

    S = tape.n_slots
    results = tape.results
    for b0 in range(0, B, _CHUNK):
        b1 = min(b0 + _CHUNK, B)
        C = b1 - b0
        Xc = X[b0:b1].T  # (n, C)
        v = np.zeros((S, C))
        g = np.zeros((S, n, C)) if mode >= MODE_GRAD else None
        h = np.zeros((S, P, C)) if mode >= MODE_HESS else None
        with np.errstate(all="ignore"):
            _run_chunk(tape, Xc, v, g, h, mode, strict, I, J)
        for r, res in enumerate(results):
            out_v[b0:b1, r] = v[res]
            if mode >= MODE_GRAD:
                out_g[b0:b1, r] = g[res].T
            if mode >= MODE_HESS:
                out_h[b0:b1, r] = h[res].T
    if k == 1:
        return (
            out_v[:, 0],
            out_g[:, 0] if out_g is not None else None,
            out_h[:, 0] if out_h is not None else None,
        )
    return out_v, out_g, out_h


def _run_chunk(tape, X, v, g, h, mode, strict, I, J):
    ops, a1, a2, out = tape.ops, tape.arg1, tape.arg2, tape.out
    consts = tape.consts
    want_g = mode >= MODE_GRAD
    want_h = mode >= MODE_HESS
    for i in range(len(ops)):
        op = ops[i]
        o = out[i]
        if op == OP_CONST:
            v[o] = consts[a1[i]]
            if want_g:
                g[o] = 0.0
            if want_h:
                h[o] = 0.0
            continue
        if op == OP_VAR:
            v[o] = X[a1[i]]
            if want_g:
                g[o] = 0.0
                g[o, a1[i]] = 1.0
            if want_h:
                h[o] = 0.0
            continue
        a = a1[i]
        if op == OP_ADD or op == OP_SUB or op == OP_MUL or op == OP_DIV:
            b = a2[i]
            va, vb = v[a], v[b]
            if op == OP_ADD:
                v[o] = va + vb
                if want_g:
                    g[o] = g[a] + g[b]
                if want_h:
                    h[o] = h[a] + h[b]
            elif op == OP_SUB:
                v[o] = va - vb
                if want_g:
                    g[o] = g[a] - g[b]
                if want_h:
                    h[o] = h[a] - h[b]
            elif op == OP_MUL:
                v[o] = va * vb
                if want_g:
                    g[o] = g[a] * vb + va * g[b]
                if want_h:
                    h[o] = h[a] * vb + va * h[b] + g[a][I] * g[b][J] + g[a][J] * g[b][I]
            else:
                if strict and np.any(vb == 0.0):
                    _bad(tape, i, "division by zero")
                vo = va / vb
                v[o] = vo
                if want_g:
                    g[o] = (g[a] - vo * g[b]) / vb
                if want_h:
                    go = g[o]
                    h[o] = (h[a] - vo * h[b] - go[I] * g[b][J] - go[J] * g[b][I]) / vb
            continue

        va = v[a]
        if op == OP_NEG:
            v[o] = -va
            if want_g:
                g[o] = -g[a]
            if want_h:
                h[o] = -h[a]
            continue
        if op == OP_WRAP:
            v[o] = va - _TWO_PI * np.floor(va / _TWO_PI + 0.5)
            if want_g:
                g[o] = g[a]
            if want_h:
                h[o] = h[a]
            continue

        # remaining ops follow the unary rule: f, f1, f2 of the input value
        if op == OP_POWI:
            k = int(a2[i])
            if k == 0:
                v[o] = 1.0
                if want_g:
                    g[o] = 0.0
                if want_h:
                    h[o] = 0.0
                continue
            if k == 1:
                v[o] = va
                if want_g:
                    g[o] = g[a]
                if want_h:
                    h[o] = h[a]
                continue
            if k >= 2:
                t = np.ones_like(va)
                for _ in range(k - 2):
                    t = t * va
                f = t * va * va
                f1 = k * (t * va)
                f2 = (k * (k - 1)) * t
            else:
                if strict and np.any(va == 0.0):
                    _bad(tape, i, "zero base with negative exponent")
                inv = 1.0 / va
                p = np.ones_like(va)
                for _ in range(-k):
                    p = p * inv
                f = p
                f1 = k * (p * inv)
                f2 = (k * (k - 1)) * (p * inv * inv)
        elif op == OP_SIN:
            f = np.sin(va)
            f1 = np.cos(va)
            f2 = -f
        elif op == OP_COS:
            f = np.cos(va)
            f1 = -np.sin(va)
            f2 = -f
        elif op == OP_TAN:
            f = np.tan(va)
            f1 = 1.0 + f * f
            f2 = 2.0 * f * f1
        elif op == OP_EXP:
            f = np.exp(va)
            f1 = f
            f2 = f
        elif op == OP_LOG:
            if strict and np.any(va <= 0.0):
                _bad(tape, i, "log of non-positive value")
            f = np.log(va)
            f1 = 1.0 / va
            f2 = -f1 * f1
        elif op == OP_SQRT:
            if strict:
                bad = np.any(va <= 0.0) if mode >= MODE_GRAD else np.any(va < 0.0)
                if bad:
                    _bad(tape, i, "sqrt of non-positive value" if mode >= MODE_GRAD else "sqrt of negative value")
            f = np.sqrt(va)
            f1 = 0.5 / f
            f2 = -0.25 / (f * va)
        elif op == OP_ABS:
            if strict and mode >= MODE_GRAD and np.any(va == 0.0):
                _bad(tape, i, "abs is not differentiable at 0")
            f = np.abs(va)
            f1 = np.sign(va)
            f2 = np.zeros_like(va)
        elif op == OP_BUMP:
            s = 1.0 - va * va
            inside = s > 0.0
            s_safe = np.where(inside, s, 1.0)
            u1 = -2.0 * va / (s_safe * s_safe)
            b = np.where(inside, np.exp(-1.0 / s_safe), 0.0)
            f = b
            f1 = np.where(inside, b * u1, 0.0)
            u2 = -2.0 / (s_safe * s_safe) - 8.0 * (va * va) / (s_safe * s_safe * s_safe)
            f2 = np.where(inside, b * (u1 * u1 + u2), 0.0)
        else:
            raise AssertionError(f"unhandled opcode {op}")

        v[o] = f
        if want_g:
            g[o] = f1 * g[a]
        if want_h:
            h[o] = f1 * h[a] + f2 * (g[a][I] * g[a][J])
