"""Charts, atlases, points and exterior calculus for Expression-coefficient forms.

Forms are stored as per-chart coefficient Expressions; sampling happens only
inside checks.  Orientation convention: the coordinate order declared in the
chart defines the volume element; `wedge_top` reports the signed coefficient
against it and contact checks use the absolute value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError, DimensionError
from .expr import Expression, const, gradients, values
from .expr.jet import gradients_vec, values_vec

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Chart:
    """Coordinate box; periodic coordinates are angles with period 2*pi."""

    name: str
    coords: tuple
    lo: tuple
    hi: tuple
    periodic: tuple

    def __post_init__(self):
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"chart '{self.name}': duplicate coordinate names")
        for i, per in enumerate(self.periodic):
            if not per and not (math.isfinite(self.lo[i]) and math.isfinite(self.hi[i])):
                raise ValueError(f"chart '{self.name}': non-periodic coordinate with infinite bounds")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def reduce(self, coords: np.ndarray) -> np.ndarray:
        """Angle-reduce periodic coordinates into [lo, lo + 2*pi)."""
        out = np.array(coords, dtype=np.float64, copy=True)
        for i, per in enumerate(self.periodic):
            if per:
                out[..., i] = self.lo[i] + np.mod(out[..., i] - self.lo[i], TWO_PI)
        return out

    def contains(self, coords: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Box membership after periodic reduction; broadcasts over (..., dim)."""
        c = self.reduce(coords)
        ok = np.ones(c.shape[:-1], dtype=bool)
        for i, per in enumerate(self.periodic):
            if per:
                continue
            ok &= (c[..., i] >= self.lo[i] - tol) & (c[..., i] <= self.hi[i] + tol)
        return ok


def chart(name, coords, box, periodic=None) -> Chart:
    coords = tuple(coords)
    periodic = tuple(bool(p) for p in periodic) if periodic is not None else (False,) * len(coords)
    lo = tuple(float(b[0]) for b in box)
    hi = tuple(float(b[1]) for b in box)
    return Chart(name, coords, lo, hi, periodic)


@dataclass(frozen=True)
class Transition:
    """Partial map between chart domains, given by coordinate Expressions.

    ``domain_box`` (over src coordinates) plus excluded balls delimit where the
    map may be evaluated; overlaps that are not boxes (stereographic annuli)
    need the exclusions.  ``tube_exprs`` is the declared holomorphic extension
    to the doubled coordinates, required before tube-level use.
    """

    name: str
    src: str
    dst: str
    exprs: tuple
    inverse: str
    domain_box: tuple = None
    exclusions: tuple = ()  # ((center tuple, radius), ...)
    tube_exprs: tuple = None

    def in_domain(self, X: np.ndarray) -> np.ndarray:
        ok = np.ones(X.shape[:-1], dtype=bool)
        if self.domain_box is not None:
            for i, (lo, hi) in enumerate(self.domain_box):
                ok &= (X[..., i] >= lo) & (X[..., i] <= hi)
        for center, radius in self.exclusions:
            c = np.asarray(center)
            d2 = np.sum((X[..., : len(c)] - c) ** 2, axis=-1)
            ok &= d2 >= radius * radius
        return ok

    def apply(self, X: np.ndarray) -> np.ndarray:
        return values_vec(self.exprs, X)


@dataclass(frozen=True)
class Atlas:
    charts: dict
    transitions: tuple = ()

    def chart(self, name: str) -> Chart:
        return self.charts[name]

    def transition(self, src: str, dst: str) -> Transition:
        for t in self.transitions:
            if t.src == src and t.dst == dst:
                return t
        raise ChartDomainError(f"no declared transition {src} -> {dst}")

    def transitions_between(self, src: str, dst: str):
        """All declared components of the overlap map src -> dst."""
        return [t for t in self.transitions if t.src == src and t.dst == dst]

    def has_transition(self, src: str, dst: str) -> bool:
        return any(t.src == src and t.dst == dst for t in self.transitions)


@dataclass(frozen=True)
class Point:
    chart: str
    coords: np.ndarray


def point(atlas: Atlas, chart_name: str, coords) -> Point:
    ch = atlas.chart(chart_name)
    c = ch.reduce(np.asarray(coords, dtype=np.float64))
    if not bool(ch.contains(c)):
        raise ChartDomainError(f"point {coords} outside chart '{chart_name}' domain")
    return Point(chart_name, c)


@dataclass(frozen=True)
class OneForm:
    """Per-chart coefficient Expressions a_1..a_dim for sum a_j dx_j."""

    coeffs: dict  # chart name -> tuple[Expression]

    def on(self, chart_name: str) -> tuple:
        return self.coeffs[chart_name]

    def at(self, chart_name: str, X: np.ndarray) -> np.ndarray:
        """Coefficient values, shape (B, dim)."""
        return eval_vector(self.coeffs[chart_name], X)


@dataclass(frozen=True)
class TwoForm:
    """Strict upper-triangle coefficient Expressions; b_ji = -b_ij structurally."""

    upper: dict  # chart name -> dict[(i, j) i<j -> Expression]
    dim: int

    def at(self, chart_name: str, X: np.ndarray) -> np.ndarray:
        B = np.zeros((X.shape[0], self.dim, self.dim))
        for (i, j), e in self.upper[chart_name].items():
            v = values(e, X)
            B[:, i, j] = v
            B[:, j, i] = -v
        return B


def eval_vector(exprs, X: np.ndarray) -> np.ndarray:
    """Values (B, m) of an Expression vector through one fused tape."""
    return values_vec(tuple(exprs), X)


def jacobian(exprs, X: np.ndarray):
    """Values (B, m) and Jacobian (B, m, n) of an Expression vector map."""
    return gradients_vec(tuple(exprs), X)


def differential(f: Expression) -> tuple:
    """Coefficients of df as Expressions over f's scope."""
    return tuple(f.diff(v) for v in f.scope)


def exterior_derivative_at(alpha_coeffs, X: np.ndarray) -> np.ndarray:
    """(d alpha)_ij = d_i a_j - d_j a_i as antisymmetric matrices (B, n, n)."""
    _, G = jacobian(alpha_coeffs, X)  # G[b, j, i] = d_i a_j
    return np.swapaxes(G, 1, 2) - G


def pullback_at(map_exprs, alpha: OneForm, dst_chart: str, X: np.ndarray, dst=None) -> np.ndarray:
    """Values of F*alpha at src points X; F given by map_exprs into dst_chart.

    Checks that mapped points stay inside the target chart when ``dst`` (a
    Chart) is supplied.
    """
    FX, DF = jacobian(map_exprs, X)
    if dst is not None:
        ok = dst.contains(FX)
        if not np.all(ok):
            bad = FX[~ok][0]
            raise ChartDomainError(f"pullback target point {bad} outside chart '{dst_chart}'")
        FX = dst.reduce(FX)
    a = alpha.at(dst_chart, FX)  # (B, m)
    return np.einsum("bmn,bm->bn", DF, a)


def pullback_symbolic(map_exprs, alpha_coeffs, src_scope) -> tuple:
    """(F*alpha)_i = sum_j (a_j o F) dF_j/dx_i as Expressions over src_scope.

    ``map_exprs`` are the components of F ordered by the coefficients' scope.
    """
    src_scope = tuple(src_scope)
    out = []
    for xi in src_scope:
        acc = const(0.0, src_scope)
        for j, aj in enumerate(alpha_coeffs):
            sub = {name: map_exprs[k] for k, name in enumerate(aj.scope)}
            comp = aj.subst(sub, scope=src_scope)
            acc = acc + comp * map_exprs[j].rescope(src_scope).diff(xi)
        out.append(acc)
    return tuple(out)


def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of a small even-dimensional antisymmetric matrix (recursive)."""
    m = A.shape[0]
    if m == 0:
        return 1.0
    if m % 2 == 1:
        raise DimensionError("pfaffian needs even dimension")
    if m == 2:
        return float(A[0, 1])
    total = 0.0
    sign = 1.0
    for j in range(1, m):
        idx = [k for k in range(m) if k != 0 and k != j]
        total += sign * A[0, j] * pfaffian(A[np.ix_(idx, idx)])
        sign = -sign
    return float(total)


def wedge_top_value(eta_vec: np.ndarray, omega_mat: np.ndarray, basis: np.ndarray = None) -> float:
    """Signed coefficient of eta ^ omega^n against the (basis) volume element.

    eta_vec (m,), omega_mat (m, m) antisymmetric; with a basis (m, 2n+1) the
    forms are first restricted to the spanned subspace.  Uses the bordered
    Pfaffian identity (eta ^ omega^n)(e_1..e_{2n+1}) = n! Pf(B).
    """
    if basis is not None:
        eta_vec = basis.T @ eta_vec
        omega_mat = basis.T @ omega_mat @ basis
    m = eta_vec.shape[0]
    if m % 2 != 1:
        raise DimensionError("wedge_top needs odd dimension")
    n = (m - 1) // 2
    B = np.zeros((m + 1, m + 1))
    B[0, 1:] = eta_vec
    B[1:, 0] = -eta_vec
    B[1:, 1:] = omega_mat
    return math.factorial(n) * pfaffian(B)


def wedge_top(eta: OneForm, chart_name: str, X: np.ndarray) -> np.ndarray:
    """Batch of signed eta ^ (d eta)^n coefficients at points X of one chart."""
    a = eta.at(chart_name, X)
    dA = exterior_derivative_at(eta.on(chart_name), X)
    return np.array([wedge_top_value(a[b], dA[b]) for b in range(X.shape[0])])


@dataclass
class ContactReport:
    min_abs: float
    samples: int
    passed: bool


def contact_check(eta: OneForm, samples: dict, threshold: float = 1e-8) -> ContactReport:
    """Minimum |wedge_top| over per-chart sample batches; pass iff above threshold."""
    best = math.inf
    count = 0
    for chart_name, X in samples.items():
        if X.shape[0] == 0:
            continue
        w = wedge_top(eta, chart_name, X)
        best = min(best, float(np.min(np.abs(w))))
        count += X.shape[0]
    return ContactReport(min_abs=best, samples=count, passed=best > threshold)


def transition_roundtrip_residual(atlas: Atlas, t: Transition, X: np.ndarray) -> float:
    """Max |T_inv(T(x)) - x| over sample points X (periodic differences reduced)."""
    inv = None
    for cand in atlas.transitions:
        if cand.name == t.inverse:
            inv = cand
            break
    if inv is None:
        raise ChartDomainError(f"transition '{t.name}' lacks declared inverse '{t.inverse}'")
    Y = t.apply(X)
    keep = inv.in_domain(Y)
    back = inv.apply(Y[keep])
    src = atlas.chart(t.src)
    diff = back - X[keep]
    for i, per in enumerate(src.periodic):
        if per:
            diff[:, i] = (diff[:, i] + math.pi) % TWO_PI - math.pi
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def oneform_overlap_residual(atlas: Atlas, eta: OneForm, t: Transition, X: np.ndarray) -> float:
    """Agreement of the two chart representations of eta across an overlap.

    Compares eta on the source chart with the pullback of the destination
    representation through the transition, at source sample points X.
    """
    dst = atlas.chart(t.dst)
    FX = t.apply(X)
    keep = np.asarray(dst.contains(FX)) & t.in_domain(X)
    Xk = X[keep]
    if Xk.shape[0] == 0:
        return 0.0
    pulled = pullback_at(t.exprs, eta, t.dst, Xk, dst=dst)
    here = eta.at(t.src, Xk)
    return float(np.max(np.abs(pulled - here)))
