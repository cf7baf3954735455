# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape evaluator: per-point jet propagation in C.

Same instruction semantics and evaluation order as kernels/pyjet.py.
Compiled with -ffp-contract=off so both backends see plain IEEE operations.
"""

import numpy as np

cimport cython
from libc.math cimport sin, cos, tan, exp, log, sqrt, fabs, floor

from ..errors import DomainError
from ..expr import nodes as _nodes

DEF TWO_PI = 6.283185307179586476925286766559

OP_CONST = 0
OP_VAR = 1

cdef enum:
    C_CONST = 0
    C_VAR = 1
    C_ADD = 2
    C_SUB = 3
    C_MUL = 4
    C_DIV = 5
    C_NEG = 6
    C_POWI = 7
    C_SIN = 8
    C_COS = 9
    C_TAN = 10
    C_EXP = 11
    C_LOG = 12
    C_SQRT = 13
    C_ABS = 14
    C_BUMP = 15
    C_WRAP = 16

cdef enum:
    E_NONE = 0
    E_DIV0 = 1
    E_LOG = 2
    E_SQRT = 3
    E_ABS0 = 4
    E_POWI0 = 5

_ERR_MSG = {
    1: "division by zero",
    2: "log of non-positive value",
    3: "sqrt of non-positive value",
    4: "abs is not differentiable at 0",
    5: "zero base with negative exponent",
}


def evaluate(tape, X, int mode=2, bint strict=True):
    """Run ``tape`` on points X (B, n_vars); see kernels.pyjet.evaluate."""
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int n = tape.n_vars
    if Xv.shape[1] != n:
        raise ValueError(f"expected points of shape (B, {n})")
    cdef int B = Xv.shape[0]
    cdef int P = n * (n + 1) // 2
    cdef int S = tape.n_slots
    cdef int n_ops = len(tape.ops)
    cdef int n_out = tape.n_out

    cdef int[::1] ops = np.ascontiguousarray(tape.ops, dtype=np.int32)
    cdef int[::1] a1 = np.ascontiguousarray(tape.arg1, dtype=np.int32)
    cdef int[::1] a2 = np.ascontiguousarray(tape.arg2, dtype=np.int32)
    cdef int[::1] outr = np.ascontiguousarray(tape.out, dtype=np.int32)
    cdef int[::1] results = np.ascontiguousarray(tape.results, dtype=np.int32)
    cdef double[::1] consts = np.ascontiguousarray(tape.consts, dtype=np.float64)

    out_v_arr = np.empty((B, n_out))
    cdef double[:, ::1] out_v = out_v_arr
    out_g_arr = np.empty((B, n_out, n)) if mode >= 1 else None
    out_h_arr = np.empty((B, n_out, P)) if mode >= 2 else None
    cdef double[:, :, ::1] out_g = out_g_arr if mode >= 1 else np.empty((1, 1, n))
    cdef double[:, :, ::1] out_h = out_h_arr if mode >= 2 else np.empty((1, 1, P))

    # packed index tables
    II_arr = np.empty(P, dtype=np.int32)
    JJ_arr = np.empty(P, dtype=np.int32)
    cdef int[::1] II = II_arr
    cdef int[::1] JJ = JJ_arr
    cdef int i_, j_, k_ = 0
    for i_ in range(n):
        for j_ in range(i_, n):
            II[k_] = i_
            JJ[k_] = j_
            k_ += 1

    buf_v_arr = np.zeros(S)
    buf_g_arr = np.zeros(S * n if mode >= 1 else 1)
    buf_h_arr = np.zeros(S * P if mode >= 2 else 1)
    cdef double[::1] bv = buf_v_arr
    cdef double[::1] bg = buf_g_arr
    cdef double[::1] bh = buf_h_arr

    cdef int err_code = E_NONE
    cdef int err_instr = -1

    with nogil:
        err_code = _run(Xv, B, n, P, n_ops, ops, a1, a2, outr, consts,
                        bv, bg, bh, out_v, out_g, out_h, II, JJ,
                        mode, strict, results, n_out, &err_instr)

    if err_code != E_NONE:
        node = tape.nodes[err_instr]
        raise DomainError(_ERR_MSG[err_code], _nodes.serialize(node))
    if n_out == 1:
        return (
            out_v_arr[:, 0],
            out_g_arr[:, 0] if out_g_arr is not None else None,
            out_h_arr[:, 0] if out_h_arr is not None else None,
        )
    return out_v_arr, out_g_arr, out_h_arr


@cython.boundscheck(False)
@cython.wraparound(False)
cdef int _run(double[:, ::1] X, int B, int n, int P, int n_ops,
              int[::1] ops, int[::1] a1, int[::1] a2, int[::1] outr,
              double[::1] consts,
              double[::1] bv, double[::1] bg, double[::1] bh,
              double[:, ::1] out_v, double[:, :, ::1] out_g, double[:, :, ::1] out_h,
              int[::1] II, int[::1] JJ,
              int mode, bint strict, int[::1] results, int n_out, int* err_instr) nogil:
    cdef int p, i, j, k, op, a, b, o, kk, m
    cdef int ga, gb, go, ha, hb, ho
    cdef double va, vb, vo, f, f1, f2, t, inv, pw, s, u1, u2, bb
    for p in range(B):
        for i in range(n_ops):
            op = ops[i]
            o = outr[i]
            a = a1[i]
            b = a2[i]
            go = o * n
            ho = o * P
            ga = a * n
            ha = a * P
            if op == C_CONST:
                bv[o] = consts[a]
                if mode >= 1:
                    for j in range(n):
                        bg[go + j] = 0.0
                if mode >= 2:
                    for k in range(P):
                        bh[ho + k] = 0.0
                continue
            if op == C_VAR:
                bv[o] = X[p, a]
                if mode >= 1:
                    for j in range(n):
                        bg[go + j] = 0.0
                    bg[go + a] = 1.0
                if mode >= 2:
                    for k in range(P):
                        bh[ho + k] = 0.0
                continue
            if op == C_ADD or op == C_SUB or op == C_MUL or op == C_DIV:
                gb = b * n
                hb = b * P
                va = bv[a]
                vb = bv[b]
                if op == C_ADD:
                    bv[o] = va + vb
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = bg[ga + j] + bg[gb + j]
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = bh[ha + k] + bh[hb + k]
                elif op == C_SUB:
                    bv[o] = va - vb
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = bg[ga + j] - bg[gb + j]
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = bh[ha + k] - bh[hb + k]
                elif op == C_MUL:
                    bv[o] = va * vb
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = (bh[ha + k] * vb + va * bh[hb + k]
                                          + bg[ga + II[k]] * bg[gb + JJ[k]]
                                          + bg[ga + JJ[k]] * bg[gb + II[k]])
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = bg[ga + j] * vb + va * bg[gb + j]
                else:
                    if strict and vb == 0.0:
                        err_instr[0] = i
                        return E_DIV0
                    vo = va / vb
                    bv[o] = vo
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = (bg[ga + j] - vo * bg[gb + j]) / vb
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = (bh[ha + k] - vo * bh[hb + k]
                                          - bg[go + II[k]] * bg[gb + JJ[k]]
                                          - bg[go + JJ[k]] * bg[gb + II[k]]) / vb
                continue

            va = bv[a]
            if op == C_NEG:
                bv[o] = -va
                if mode >= 1:
                    for j in range(n):
                        bg[go + j] = -bg[ga + j]
                if mode >= 2:
                    for k in range(P):
                        bh[ho + k] = -bh[ha + k]
                continue
            if op == C_WRAP:
                bv[o] = va - TWO_PI * floor(va / TWO_PI + 0.5)
                if mode >= 1:
                    for j in range(n):
                        bg[go + j] = bg[ga + j]
                if mode >= 2:
                    for k in range(P):
                        bh[ho + k] = bh[ha + k]
                continue

            if op == C_POWI:
                m = b
                if m == 0:
                    bv[o] = 1.0
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = 0.0
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = 0.0
                    continue
                if m == 1:
                    bv[o] = va
                    if mode >= 1:
                        for j in range(n):
                            bg[go + j] = bg[ga + j]
                    if mode >= 2:
                        for k in range(P):
                            bh[ho + k] = bh[ha + k]
                    continue
                if m >= 2:
                    t = 1.0
                    for kk in range(m - 2):
                        t = t * va
                    f = t * va * va
                    f1 = m * (t * va)
                    f2 = (m * (m - 1)) * t
                else:
                    if strict and va == 0.0:
                        err_instr[0] = i
                        return E_POWI0
                    inv = 1.0 / va
                    pw = 1.0
                    for kk in range(-m):
                        pw = pw * inv
                    f = pw
                    f1 = m * (pw * inv)
                    f2 = (m * (m - 1)) * (pw * inv * inv)
            elif op == C_SIN:
                f = sin(va)
                f1 = cos(va)
                f2 = -f
            elif op == C_COS:
                f = cos(va)
                f1 = -sin(va)
                f2 = -f
            elif op == C_TAN:
                f = tan(va)
                f1 = 1.0 + f * f
                f2 = 2.0 * f * f1
            elif op == C_EXP:
                f = exp(va)
                f1 = f
                f2 = f
            elif op == C_LOG:
                if strict and va <= 0.0:
                    err_instr[0] = i
                    return E_LOG
                f = log(va)
                f1 = 1.0 / va
                f2 = -f1 * f1
            elif op == C_SQRT:
                if strict:
                    if (mode >= 1 and va <= 0.0) or va < 0.0:
                        err_instr[0] = i
                        return E_SQRT
                f = sqrt(va)
                f1 = 0.5 / f
                f2 = -0.25 / (f * va)
            elif op == C_ABS:
                if strict and mode >= 1 and va == 0.0:
                    err_instr[0] = i
                    return E_ABS0
                f = fabs(va)
                f1 = 1.0 if va > 0.0 else (-1.0 if va < 0.0 else 0.0)
                f2 = 0.0
            elif op == C_BUMP:
                s = 1.0 - va * va
                if s > 0.0:
                    u1 = -2.0 * va / (s * s)
                    bb = exp(-1.0 / s)
                    u2 = -2.0 / (s * s) - 8.0 * (va * va) / (s * s * s)
                    f = bb
                    f1 = bb * u1
                    f2 = bb * (u1 * u1 + u2)
                else:
                    f = 0.0
                    f1 = 0.0
                    f2 = 0.0
            else:
                err_instr[0] = i
                return E_NONE  # unreachable

            bv[o] = f
            if mode >= 2:
                for k in range(P):
                    bh[ho + k] = f1 * bh[ha + k] + f2 * (bg[ga + II[k]] * bg[ga + JJ[k]])
            if mode >= 1:
                for j in range(n):
                    bg[go + j] = f1 * bg[ga + j]

        for m in range(n_out):
            out_v[p, m] = bv[results[m]]
            if mode >= 1:
                for j in range(n):
                    out_g[p, m, j] = bg[results[m] * n + j]
            if mode >= 2:
                for k in range(P):
                    out_h[p, m, k] = bh[results[m] * P + k]
    return E_NONE
