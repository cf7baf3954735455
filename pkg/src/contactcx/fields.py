"""Scalar fields on an atlas as guarded sums of per-chart Expressions.

A patched potential is a sum of compactly supported terms.  A term born on
chart beta, materialized on chart alpha, is the composition with the declared
transition; it is only evaluable where the transition is, so it carries a
guard: a numeric map plus a box.  Points failing the guard (or where the guard
map is singular) are outside the term's support and contribute exactly zero.

Single-chart fields are one guardless term; every construction below reduces
to plain Expression algebra in that case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Expression, jets as expr_jets, gradients as expr_gradients, values as expr_values
from .expr.jet import values_vec
from .expr.tape import MODE_GRAD, MODE_HESS, MODE_VAL, hess_size


@dataclass(frozen=True)
class Guard:
    """Pass iff map(point) is finite and componentwise inside box.

    With ``outside`` set the test inverts: pass iff the mapped point is NOT
    fully inside the box (used to carve out loci where a composed expression
    is singular but known to vanish).
    """

    map_exprs: tuple  # Expressions over the evaluation chart's scope
    box: tuple  # ((lo, hi), ...) aligned with map_exprs
    outside: bool = False

    def mask(self, X: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            V = values_vec(self.map_exprs, X, strict=False)  # (B, k)
        finite = np.all(np.isfinite(V), axis=1)
        inside = finite.copy()
        for j, (lo, hi) in enumerate(self.box):
            inside &= np.isfinite(V[:, j]) & (V[:, j] >= lo) & (V[:, j] <= hi)
        if self.outside:
            return finite & ~inside
        return inside

    def compose(self, table: dict, scope) -> "Guard":
        return Guard(tuple(e.subst(table, scope=scope) for e in self.map_exprs), self.box, self.outside)


@dataclass(frozen=True)
class Term:
    expr: Expression
    guards: tuple = ()

    def compose(self, table: dict, scope) -> "Term":
        return Term(
            self.expr.subst(table, scope=scope),
            tuple(g.compose(table, scope) for g in self.guards),
        )


@dataclass(frozen=True)
class ScalarField:
    """chart name -> list of Terms expressed in that chart's coordinates."""

    terms: dict

    @staticmethod
    def single(chart_name: str, expr: Expression) -> "ScalarField":
        return ScalarField({chart_name: (Term(expr),)})

    @property
    def charts(self):
        return self.terms.keys()

    def expr_on(self, chart_name: str) -> Expression:
        """The plain Expression when the chart's terms carry no guards."""
        ts = self.terms[chart_name]
        if any(t.guards for t in ts):
            raise ValueError("field has guarded terms on this chart; no single expression exists")
        acc = ts[0].expr
        for t in ts[1:]:
            acc = acc + t.expr
        return acc

    def scope_on(self, chart_name: str):
        return self.terms[chart_name][0].expr.scope

    def evaluate(self, chart_name: str, X: np.ndarray, mode: int = MODE_HESS):
        """Guarded-sum jets at points X of one chart: (val, grad, hess-packed)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        B = X.shape[0]
        n = X.shape[1]
        v = np.zeros(B)
        g = np.zeros((B, n)) if mode >= MODE_GRAD else None
        h = np.zeros((B, hess_size(n))) if mode >= MODE_HESS else None
        for term in self.terms[chart_name]:
            mask = np.ones(B, dtype=bool)
            for guard in term.guards:
                mask &= guard.mask(X)
                if not mask.any():
                    break
            if not mask.any():
                continue
            Xm = X if mask.all() else X[mask]
            if mode >= MODE_HESS:
                tv, tg, th = expr_jets(term.expr, Xm)
            elif mode >= MODE_GRAD:
                (tv, tg), th = expr_gradients(term.expr, Xm), None
            else:
                tv, tg, th = expr_values(term.expr, Xm), None, None
            if mask.all():
                v += tv
                if tg is not None:
                    g += tg
                if th is not None:
                    h += th
            else:
                v[mask] += tv
                if tg is not None:
                    g[mask] += tg
                if th is not None:
                    h[mask] += th
        return v, g, h

    def values(self, chart_name: str, X: np.ndarray) -> np.ndarray:
        return self.evaluate(chart_name, X, MODE_VAL)[0]

    def compose(self, tables: dict) -> "ScalarField":
        """Precompose chart-wise with maps chart -> same chart (e.g. a group element).

        tables: chart name -> dict var -> Expression over the same chart scope.
        Charts absent from ``tables`` are dropped.
        """
        out = {}
        for chart_name, table in tables.items():
            scope = self.scope_on(chart_name)
            out[chart_name] = tuple(t.compose(table, scope) for t in self.terms[chart_name])
        return ScalarField(out)

    def pullback_through(self, chart_name: str, table: dict, new_chart: str, new_scope) -> "ScalarField":
        """Field composed with a map new-chart -> chart_name (cross-section use)."""
        new_scope = tuple(new_scope)
        ts = tuple(t.compose(table, new_scope) for t in self.terms[chart_name])
        return ScalarField({new_chart: ts})

    def __add__(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            out = {}
            for chart_name in self.terms:
                extra = other.terms.get(chart_name, ())
                out[chart_name] = tuple(self.terms[chart_name]) + tuple(extra)
            for chart_name in other.terms:
                if chart_name not in out:
                    out[chart_name] = tuple(other.terms[chart_name])
            return ScalarField(out)
        raise TypeError("can only add ScalarField to ScalarField")

    def scale(self, c: float) -> "ScalarField":
        return ScalarField(
            {ch: tuple(Term(t.expr * float(c), t.guards) for t in ts) for ch, ts in self.terms.items()}
        )

    def map_exprs(self, fn) -> "ScalarField":
        """Apply an Expression -> Expression transform to every term (guards kept)."""
        return ScalarField(
            {ch: tuple(Term(fn(t.expr), t.guards) for t in ts) for ch, ts in self.terms.items()}
        )


def average_terms(fields) -> ScalarField:
    """Equal-weight quadrature sum of already-composed copies of a field."""
    fields = list(fields)
    acc = fields[0].scale(1.0 / len(fields))
    for f in fields[1:]:
        acc = acc + f.scale(1.0 / len(fields))
    return acc
