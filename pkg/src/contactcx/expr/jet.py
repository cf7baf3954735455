"""Jet evaluation: exact value / gradient / Hessian of an Expression at points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DomainError
from .nodes import Expression
from .tape import MODE_GRAD, MODE_HESS, MODE_VAL, compile_tape, compile_vector, unpack_hessian


@dataclass(frozen=True)
class JetValue:
    """Second-order jet: value, gradient, symmetric Hessian (scope-ordered)."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _point_row(expr: Expression, assignment) -> np.ndarray:
    if isinstance(assignment, dict):
        missing = [v for v in expr.scope if v not in assignment]
        if missing:
            raise DomainError(f"assignment misses variable '{missing[0]}'")
        return np.array([[float(assignment[v]) for v in expr.scope]])
    row = np.asarray(assignment, dtype=np.float64).reshape(1, -1)
    if row.shape[1] != len(expr.scope):
        raise ValueError(f"expected {len(expr.scope)} coordinates")
    return row


def evaluate_jet(expr: Expression, assignment) -> JetValue:
    """Full second-order jet at one point (dict name->value or coordinate row)."""
    X = _point_row(expr, assignment)
    v, g, h = kernels.evaluate(compile_tape(expr), X, MODE_HESS, strict=True)
    n = len(expr.scope)
    return JetValue(float(v[0]), g[0].copy(), unpack_hessian(h, n)[0])


def value(expr: Expression, assignment) -> float:
    X = _point_row(expr, assignment)
    v, _, _ = kernels.evaluate(compile_tape(expr), X, MODE_VAL, strict=True)
    return float(v[0])


def values(expr: Expression, X: np.ndarray, strict: bool = True) -> np.ndarray:
    """Values over a batch of points X (B, n)."""
    v, _, _ = kernels.evaluate(compile_tape(expr), X, MODE_VAL, strict=strict)
    return v


def gradients(expr: Expression, X: np.ndarray, strict: bool = True):
    """(values (B,), gradients (B, n)) over a batch."""
    v, g, _ = kernels.evaluate(compile_tape(expr), X, MODE_GRAD, strict=strict)
    return v, g


def jets(expr: Expression, X: np.ndarray, strict: bool = True):
    """(values (B,), gradients (B, n), packed Hessians (B, n(n+1)/2)) over a batch."""
    return kernels.evaluate(compile_tape(expr), X, MODE_HESS, strict=strict)


def values_vec(exprs, X: np.ndarray, strict: bool = True) -> np.ndarray:
    """Values of an Expression vector, shape (B, k); one fused tape."""
    v, _, _ = kernels.evaluate(compile_vector(exprs), X, MODE_VAL, strict=strict)
    return v if v.ndim == 2 else v[:, None]


def gradients_vec(exprs, X: np.ndarray, strict: bool = True):
    """(values (B, k), Jacobians (B, k, n)) of an Expression vector."""
    v, g, _ = kernels.evaluate(compile_vector(exprs), X, MODE_GRAD, strict=strict)
    if v.ndim == 1:
        return v[:, None], g[:, None, :]
    return v, g
