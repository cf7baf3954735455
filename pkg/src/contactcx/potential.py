"""Construction of strictly plurisubharmonic extension potentials.

Pipeline: chart-local potentials rho_alpha = sum f_j(x) y_j, partition-of-unity
patching, an explicit quadratic convexifier lambda * sum chi_beta |y|^2, and
compact-group averaging (exact sums for finite groups, trapezoid quadrature on
tori).  The product/frame route handles trivializable coframes (R^k, T^k).

Partitions are normalized by their sum.  Where a bump from another chart
enters the normalization through a transition, its pullback is singular at the
transition's excluded locus, so such terms are split: inside a declared
"vanishing box" the foreign bumps are identically zero and the denominator
keeps only home bumps; outside, the full sum is used under a guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError, UnsupportedStructureError
from .expr import Expression, const, values
from .expr.nodes import Fun, Num, Sub, Var
from .complexify import imag_name, tube_scope
from .fields import Guard, ScalarField, Term
from .geometry import Atlas, OneForm, pullback_symbolic
from .symmetry import ActionModel


def local_potential(base_coords, f_coeffs) -> Expression:
    """rho_alpha(x + iy) = sum_j f_j(x) y_j on the tube over one chart.

    Vanishes at y = 0 and pulls d^c back to sum f_j dx_j there.
    """
    scope = tube_scope(base_coords)
    acc = const(0.0, scope)
    for c, f in zip(base_coords, f_coeffs):
        acc = acc + f.rescope(scope) * Expression(Var(imag_name(c)), scope)
    return acc


@dataclass(frozen=True)
class Bump:
    """One partition bump: box (tensor) or ball shaped, smooth, compact support."""

    chart: str
    center: tuple
    halfwidth: tuple  # per-coordinate for box; single radius repeated for ball
    shape: str = "box"  # "box" | "ball"
    support_box: tuple = None  # derived if omitted

    def support(self):
        if self.support_box is not None:
            return self.support_box
        return tuple((c - w, c + w) for c, w in zip(self.center, self.halfwidth))

    def expr(self, base_coords, periodic, scope=None) -> Expression:
        """Profile exp(-1/(1-t^2)) tensorized (box) or radial (ball)."""
        scope = tuple(scope) if scope is not None else tuple(base_coords)
        if self.shape == "ball":
            if any(periodic):
                raise ScenarioError("ball bumps need non-periodic coordinates", "partition")
            r2 = const(0.0, scope)
            for c, cc in zip(base_coords, self.center):
                d = Expression(Var(c), scope) - cc
                r2 = r2 + d * d
            t = r2 * (1.0 / (self.halfwidth[0] ** 2))
            return Expression(Fun("bump", t.root), scope)
        prod = None
        for c, cc, w, per in zip(base_coords, self.center, self.halfwidth, periodic):
            d = Sub(Var(c), Num(float(cc)))
            if per:
                if w >= math.pi:
                    raise ScenarioError("periodic bump halfwidth must stay below pi", "partition")
                d = Fun("wrap", d)
            t = Expression(Num(1.0 / w), scope) * Expression(d, scope)
            b = Expression(Fun("bump", t.root), scope)
            prod = b if prod is None else prod * b
        return prod


@dataclass(frozen=True)
class PartitionOfUnity:
    """Bumps grouped by home chart, with per-chart foreign-vanishing boxes."""

    atlas: Atlas
    bumps: tuple
    vanishing_box: dict = None  # chart -> box where all foreign bumps vanish

    def home_bumps(self, chart_name):
        return [b for b in self.bumps if b.chart == chart_name]

    def foreign_bumps(self, chart_name):
        return [b for b in self.bumps if b.chart != chart_name]

    def _tube_transitions(self, src, dst):
        """All overlap components src -> dst, each with its tube extension.

        A bump seen through the wrong component evaluates to zero (its mapped
        argument leaves the support), so summing over components is exact as
        long as supports are narrower than the overlap separation.
        """
        ts = self.atlas.transitions_between(src, dst)
        if not ts:
            raise ScenarioError(f"no declared transition {src} -> {dst}", "atlas.transitions")
        for t in ts:
            if t.tube_exprs is None:
                raise ScenarioError(f"transition '{t.name}' lacks a tube extension", "atlas.transitions")
        return ts

    def _bump_expr(self, b: Bump, scope) -> Expression:
        ch = self.atlas.chart(b.chart)
        return b.expr(ch.coords, ch.periodic, scope=scope)

    def _sums(self, chart_name, scope):
        """(home sum, foreign sum or None) as Expressions over ``scope``.

        Foreign bumps enter through the tube transition; the mapped real parts
        feed the bump profiles.
        """
        home = None
        for b in self.home_bumps(chart_name):
            e = self._bump_expr(b, scope)
            home = e if home is None else home + e
        if home is None:
            raise ScenarioError(f"chart '{chart_name}' has no home bump", "partition")
        foreigns = self.foreign_bumps(chart_name)
        if not foreigns:
            return home, None
        foreign = None
        for b in foreigns:
            dst_scope = tube_scope(self.atlas.chart(b.chart).coords)
            for t in self._tube_transitions(chart_name, b.chart):
                table = {name: t.tube_exprs[i].rescope(scope) for i, name in enumerate(dst_scope)}
                e = self._bump_expr(b, dst_scope).subst(table, scope=scope)
                foreign = e if foreign is None else foreign + e
        return home, foreign

    def weighted_terms(self, weights: dict) -> ScalarField:
        """Field sum_beta chi_beta * weight_beta with chi normalized by the sum.

        weights: bump -> Expression over the bump's home tube scope.
        """
        per_chart = {}
        for chart_name in self.atlas.charts:
            scope = tube_scope(self.atlas.chart(chart_name).coords)
            home_sum, foreign_sum = self._sums(chart_name, scope)
            ident = tuple(Expression(Var(c), scope) for c in self.atlas.chart(chart_name).coords)
            home = self.home_bumps(chart_name)
            home_terms = []
            for b in home:
                w = weights[b].rescope(scope)
                numer = self._bump_expr(b, scope) * w
                if foreign_sum is None:
                    ch = self.atlas.chart(chart_name)
                    covers = all(
                        lo <= clo and hi >= chi_
                        for (lo, hi), clo, chi_ in zip(b.support(), ch.lo, ch.hi)
                    )
                    if len(home) == 1 and covers:
                        # single bump covering the chart normalizes to chi = 1
                        home_terms.append(Term(w))
                    else:
                        home_terms.append(Term(_div(numer, home_sum)))
                else:
                    vbox = (self.vanishing_box or {}).get(chart_name)
                    if vbox is None:
                        # regular (everywhere-defined) transitions need no split
                        home_terms.append(Term(_div(numer, home_sum + foreign_sum)))
                    else:
                        # singular transitions: inside the declared box every
                        # foreign bump vanishes and the composition is avoided
                        inner = Guard(ident, tuple(vbox))
                        outer = Guard(ident, tuple(vbox), outside=True)
                        home_terms.append(Term(_div(numer, home_sum), (inner,)))
                        home_terms.append(Term(_div(numer, home_sum + foreign_sum), (outer,)))
            per_chart[chart_name] = home_terms
        # materialize every chart's terms on every other chart through transitions
        out = {}
        for chart_name in self.atlas.charts:
            scope = tube_scope(self.atlas.chart(chart_name).coords)
            terms = list(per_chart[chart_name])
            for other in self.atlas.charts:
                if other == chart_name:
                    continue
                if not self.atlas.has_transition(chart_name, other):
                    continue
                dst_scope = tube_scope(self.atlas.chart(other).coords)
                n_dst = self.atlas.chart(other).dim
                for t in self._tube_transitions(chart_name, other):
                    table = {name: t.tube_exprs[i].rescope(scope) for i, name in enumerate(dst_scope)}
                    real_maps = tuple(t.tube_exprs[i].rescope(scope) for i in range(n_dst))
                    for b, term in zip(_twice_if_split(self.home_bumps(other), per_chart[other]), per_chart[other]):
                        comp = term.compose(table, scope)
                        supp = Guard(real_maps, b.support())
                        terms.append(Term(comp.expr, comp.guards + (supp,)))
            out[chart_name] = tuple(terms)
        return ScalarField(out)

    def sum_field(self) -> ScalarField:
        """sum_beta chi_beta as a field (should be identically 1 on every chart)."""
        weights = {b: const(1.0, tube_scope(self.atlas.chart(b.chart).coords)) for b in self.bumps}
        return self.weighted_terms(weights)

    def cover_residual(self, samples: dict) -> float:
        """|sum chi - 1| at base samples (embedded into the tube at y = 0)."""
        s = self.sum_field()
        worst = 0.0
        for chart_name, X in samples.items():
            if X.shape[0] == 0:
                continue
            n = self.atlas.chart(chart_name).dim
            E = np.zeros((X.shape[0], 2 * n))
            E[:, :n] = X
            v = s.values(chart_name, E)
            worst = max(worst, float(np.max(np.abs(v - 1.0))))
        return worst


def _div(a: Expression, b: Expression) -> Expression:
    from .expr.nodes import Div as _D

    return Expression(_D(a.root, b.root), a.scope)


def _twice_if_split(bumps, terms):
    """Align the bump list with its term list (bumps double when split)."""
    if len(terms) == len(bumps):
        return list(bumps)
    assert len(terms) == 2 * len(bumps)
    out = []
    for b in bumps:
        out.extend([b, b])
    return out


def patch(local_potentials: dict, partition: PartitionOfUnity, samples: dict = None, cover_tol: float = 1e-10) -> ScalarField:
    """rho = sum_beta chi_beta rho_beta; optional cover check on base samples.

    local_potentials: bump -> Expression over its home tube scope, vanishing on
    M in its patch.  The 0 * d^c(chi) term drops on M because each rho_beta
    does, so the pullback identity survives patching.
    """
    if samples is not None:
        gap = partition.cover_residual(samples)
        if gap > cover_tol:
            raise ScenarioError(f"partition cover gap {gap:.3e} exceeds {cover_tol:.1e}", "partition")
    return partition.weighted_terms(local_potentials)


def trivial_partition_field(chart_name: str, rho: Expression) -> ScalarField:
    """Single chart, chi = 1."""
    return ScalarField.single(chart_name, rho)


def convexifier_field(partition: PartitionOfUnity = None, chart_name: str = None, base_coords=None) -> ScalarField:
    """nu = sum_beta chi_beta |y|^2; nu|_M = 0 and iota* d^c nu = 0 exactly.

    With a trivial partition pass ``chart_name``/``base_coords`` instead.
    """
    if partition is None:
        scope = tube_scope(base_coords)
        acc = const(0.0, scope)
        for c in base_coords:
            yv = Expression(Var(imag_name(c)), scope)
            acc = acc + yv * yv
        return ScalarField.single(chart_name, acc)
    weights = {}
    for b in partition.bumps:
        coords = partition.atlas.chart(b.chart).coords
        scope = tube_scope(coords)
        acc = const(0.0, scope)
        for c in coords:
            yv = Expression(Var(imag_name(c)), scope)
            acc = acc + yv * yv
        weights[b] = acc
    return partition.weighted_terms(weights)


def convexify(rho: ScalarField, nu: ScalarField, lam: float) -> ScalarField:
    """rho + lambda nu; lambda >= 0 (lambda = 0 is the identity)."""
    if lam < 0:
        raise ScenarioError("convexifier weight must be non-negative")
    if lam == 0.0:
        return rho
    return rho + nu.scale(lam)


def torus_nodes(k: int, n_nodes: int):
    """Uniform trapezoid nodes on T^k (spectral accuracy on smooth integrands)."""
    if k == 1:
        return [(2.0 * math.pi * i / n_nodes,) for i in range(n_nodes)]
    out = [()]
    for _ in range(k):
        out = [tup + (2.0 * math.pi * i / n_nodes,) for tup in out for i in range(n_nodes)]
    return out


def average(rho: ScalarField, action: ActionModel, n_nodes: int = 64) -> ScalarField:
    """Group-average over a compact group acting holomorphically on the tube.

    Finite groups: exact sum over elements.  T^k / matrix circle: trapezoid
    quadrature with n_nodes per torus dimension.  Preserves the pullback
    identity exactly (eta is invariant); invariance of the result is exact for
    finite groups and spectrally accurate in n_nodes for tori.
    """
    group = action.group
    if not group.is_compact:
        raise UnsupportedStructureError("averaging needs a compact group (finite or torus)")
    if group.is_finite:
        nodes = list(group.elements)
    else:
        nodes = torus_nodes(group.k, n_nodes)
    weight = 1.0 / len(nodes)
    acc = None
    for g in nodes:
        tables = {}
        for chart_name in rho.charts:
            exprs = action.map_exprs(chart_name, g, tube=True)
            scope = rho.scope_on(chart_name)
            tables[chart_name] = {name: exprs[i].rescope(scope) for i, name in enumerate(scope)}
        moved = rho.compose(tables).scale(weight)
        acc = moved if acc is None else acc + moved
    return acc


@dataclass(frozen=True)
class FrameDecomposition:
    """pi_K^* eta = sum_j pi_S^*(f_j) pi_G^*(beta_j) + pi_S^*(sigma_S) on G x S.

    beta_j are the coordinate differentials of the (R^k or T^k) group factor.
    """

    chart: str
    g_coords: tuple
    s_coords: tuple
    f: tuple  # Expressions over s_coords
    sigma: tuple  # Expressions over s_coords


def frame_decompose(eta: OneForm, chart_name: str, g_coords, s_coords, identity_at=0.0) -> FrameDecomposition:
    """Split an invariant form on a declared product presentation G x S.

    sigma_S is the pullback along s -> (e, s); the frame coefficients are the
    dg_j components at the identity slice.
    """
    g_coords = tuple(g_coords)
    s_coords = tuple(s_coords)
    coeffs = eta.on(chart_name)
    scope = coeffs[0].scope
    if set(scope) != set(g_coords) | set(s_coords):
        raise ScenarioError("product presentation does not match the chart coordinates", "frame")
    # inclusion s -> (e, s)
    incl = []
    for name in scope:
        if name in g_coords:
            incl.append(const(float(identity_at), s_coords))
        else:
            incl.append(Expression(Var(name), s_coords))
    sigma = pullback_symbolic(tuple(incl), coeffs, s_coords)
    at_identity = {name: const(float(identity_at), scope) for name in g_coords}
    f = []
    for gc in g_coords:
        comp = coeffs[scope.index(gc)]
        f.append(comp.subst(at_identity, scope=s_coords))
    return FrameDecomposition(chart=chart_name, g_coords=g_coords, s_coords=s_coords, f=tuple(f), sigma=tuple(sigma))


def frame_reconstruction_residual(fd: FrameDecomposition, eta: OneForm, X: np.ndarray) -> float:
    """max coefficient residual of the reconstruction identity at product samples."""
    coeffs = eta.on(fd.chart)
    scope = coeffs[0].scope
    actual = np.stack([values(c, X) for c in coeffs], axis=-1)
    s_idx = [scope.index(s) for s in fd.s_coords]
    XS = X[:, s_idx]
    recon = np.zeros_like(actual)
    for j, gc in enumerate(fd.g_coords):
        recon[:, scope.index(gc)] = values(fd.f[j], XS)
    for i, sc in enumerate(fd.s_coords):
        recon[:, scope.index(sc)] += values(fd.sigma[i], XS)
    return float(np.max(np.abs(actual - recon)))


def product_potential(fd: FrameDecomposition) -> Expression:
    """Theta + theta_S on the product tube.

    Theta = sum_j F_j(s) rho_j(g) with rho_j the imaginary part of the j-th
    complexified group coordinate (so rho_j|_G = 0 and iota* d^c rho_j =
    beta_j); F_j extends f_j constantly in the imaginary directions.  theta_S
    is the chart-local extension potential of sigma_S.
    """
    coeffs_scope = fd.g_coords + fd.s_coords
    # present the product chart with G coordinates first, then S
    scope = tube_scope(coeffs_scope)
    theta = const(0.0, scope)
    for j, gc in enumerate(fd.g_coords):
        F = fd.f[j].rescope(scope)
        theta = theta + F * Expression(Var(imag_name(gc)), scope)
    sig = local_potential(fd.s_coords, fd.sigma)
    theta = theta + sig.rescope(scope)
    return theta
