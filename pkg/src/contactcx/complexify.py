"""Tube complexifications: doubled charts, J, d^c / dd^c, spsh and CR checks.

Convention (fixed package-wide): J dx_j = dy_j, J dy_j = -dx_j on tube
coordinates (x_1..x_n, y_1..y_n), and d^c f = df o J.  Consequences used as
fixtures: d^c(e^t) = -e^t ds on the (t, s) tube, d^c|z|^2 = 2y dx - 2x dy,
and omega = -dd^c|z|^2 = 4 dx ^ dy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ScenarioError
from .expr import Expression, values
from .expr.tape import MODE_GRAD, MODE_HESS, unpack_hessian
from .fields import ScalarField
from .geometry import Atlas, Chart, Transition

IM_SUFFIX = "_im"


def imag_name(coord: str) -> str:
    return coord + IM_SUFFIX


def tube_scope(base_coords) -> tuple:
    return tuple(base_coords) + tuple(imag_name(c) for c in base_coords)


def tube_chart(ch: Chart, r: float) -> Chart:
    n = ch.dim
    for c in ch.coords:
        if imag_name(c) in ch.coords:
            raise ScenarioError(f"coordinate '{imag_name(c)}' collides with the tube naming scheme")
    return Chart(
        name=ch.name,
        coords=tube_scope(ch.coords),
        lo=ch.lo + (-float(r),) * n,
        hi=ch.hi + (float(r),) * n,
        periodic=ch.periodic + (False,) * n,
    )


@dataclass(frozen=True)
class TubeComplexification:
    """Doubled-coordinate atlas around the base at y = 0."""

    base: Atlas
    tube: Atlas
    radius: dict  # chart name -> r

    def base_dim(self, chart_name: str) -> int:
        return self.base.chart(chart_name).dim

    def embed(self, chart_name: str, X: np.ndarray) -> np.ndarray:
        """Base samples (B, n) -> tube samples (B, 2n) at y = 0."""
        B, n = X.shape
        out = np.zeros((B, 2 * n))
        out[:, :n] = X
        return out


def complexify(atlas: Atlas, r) -> TubeComplexification:
    """Tube complexification of every chart; r scalar or per-chart dict.

    Multi-chart atlases must declare holomorphic extensions (tube_exprs) for
    every transition.
    """
    radii = {name: (r[name] if isinstance(r, dict) else float(r)) for name in atlas.charts}
    for rr in radii.values():
        if rr <= 0:
            raise ScenarioError("tube radius must be positive")
    tcharts = {name: tube_chart(ch, radii[name]) for name, ch in atlas.charts.items()}
    ttransitions = []
    for t in atlas.transitions:
        if t.tube_exprs is None:
            raise ScenarioError(
                f"transition '{t.name}' lacks a declared holomorphic extension", path="atlas.transitions"
            )
        n = atlas.chart(t.src).dim
        rr = radii[t.src]
        dom = t.domain_box if t.domain_box is not None else tuple(zip(atlas.chart(t.src).lo, atlas.chart(t.src).hi))
        tube_dom = tuple(dom) + tuple((-4.0 * rr, 4.0 * rr) for _ in range(n))
        ttransitions.append(
            Transition(
                name=t.name,
                src=t.src,
                dst=t.dst,
                exprs=t.tube_exprs,
                inverse=t.inverse,
                domain_box=tube_dom,
                exclusions=t.exclusions,
                tube_exprs=None,
            )
        )
    return TubeComplexification(base=atlas, tube=Atlas(tcharts, tuple(ttransitions)), radius=radii)


def j_matrix(n: int) -> np.ndarray:
    """J on tube coordinates: J e_{x_j} = e_{y_j}, J e_{y_j} = -e_{x_j}; J^2 = -1."""
    J = np.zeros((2 * n, 2 * n))
    J[n:, :n] = np.eye(n)
    J[:n, n:] = -np.eye(n)
    return J


def dc_from_gradient(grad: np.ndarray) -> np.ndarray:
    """Coefficients of d^c f from the tube gradient: (grad_y, -grad_x)."""
    m = grad.shape[-1]
    n = m // 2
    out = np.empty_like(grad)
    out[..., :n] = grad[..., n:]
    out[..., n:] = -grad[..., :n]
    return out


def dc_symbolic(rho: Expression) -> tuple:
    """d^c rho as coefficient Expressions over the tube scope (dx then dy slots)."""
    scope = rho.scope
    n = len(scope) // 2
    out = [rho.diff(scope[n + j]) for j in range(n)]
    out += [-rho.diff(scope[j]) for j in range(n)]
    return tuple(out)


def ddc_from_hessian(H: np.ndarray, J: np.ndarray) -> np.ndarray:
    """dd^c f = H J + J H (antisymmetric); omega = -dd^c f."""
    return H @ J + J @ H


def metric_from_hessian(H: np.ndarray, J: np.ndarray) -> np.ndarray:
    """g(v, w) = omega(v, J w) with omega = -dd^c f; equals H - J H J, symmetric."""
    return H - J @ H @ J


@dataclass
class SpshReport:
    min_eig: float
    samples: int
    passed: bool


def spsh_check(rho: ScalarField, samples: dict) -> SpshReport:
    """Minimum eigenvalue of sym(g) over tube samples; strict psh iff > 0."""
    best = np.inf
    count = 0
    for chart_name, X in samples.items():
        if X.shape[0] == 0:
            continue
        n = X.shape[1] // 2
        J = j_matrix(n)
        _, _, hp = rho.evaluate(chart_name, X, MODE_HESS)
        H = unpack_hessian(hp, 2 * n)
        for b in range(X.shape[0]):
            g = metric_from_hessian(H[b], J)
            g = 0.5 * (g + g.T)
            ev = float(np.linalg.eigvalsh(g)[0])
            if ev < best:
                best = ev
        count += X.shape[0]
    return SpshReport(min_eig=float(best), samples=count, passed=best > 0.0)


def newton_project(rho: ScalarField, chart_name: str, seeds: np.ndarray, tol: float = 1e-12, max_iter: int = 50, grad_floor: float = 1e-8) -> np.ndarray:
    """Project seeds onto rho = 0 along the gradient flow direction."""
    X = np.array(seeds, dtype=np.float64, copy=True)
    for _ in range(max_iter):
        v, g, _ = rho.evaluate(chart_name, X, MODE_GRAD)
        if np.all(np.abs(v) <= tol):
            return X
        norms2 = np.sum(g * g, axis=1)
        if np.any(np.sqrt(norms2) < grad_floor):
            raise ConvergenceError("gradient below 1e-8 while projecting onto the level set")
        X -= (v / norms2)[:, None] * g
    v = rho.evaluate(chart_name, X, 0)[0]
    if np.all(np.abs(v) <= tol):
        return X
    raise ConvergenceError(f"Newton projection did not reach |rho| <= {tol} in {max_iter} iterations")


@dataclass
class CRReport:
    points: dict  # chart -> projected samples on rho^{-1}(0)
    levi_min: float
    min_drho: float
    h_dim: int
    samples: int
    passed: bool


def cr_hypersurface(rho: ScalarField, tube: TubeComplexification, seeds: dict, rank_tol: float = 1e-8) -> CRReport:
    """Sample rho^{-1}(0), check it is a regular level, report the Levi minimum.

    At each projected point: H_p is the null space of span{d rho, d^c rho};
    the Levi form is -dd^c rho(v, J v) = g(v, v) restricted to H_p.
    """
    levi_min = np.inf
    min_drho = np.inf
    count = 0
    pts = {}
    h_dim_expected = None
    for chart_name, S in seeds.items():
        if S.shape[0] == 0:
            pts[chart_name] = S
            continue
        n = S.shape[1] // 2
        J = j_matrix(n)
        X = newton_project(rho, chart_name, S)
        ch = tube.tube.chart(chart_name)
        X = X[np.asarray(ch.contains(X))]
        pts[chart_name] = X
        if h_dim_expected is None:
            h_dim_expected = 2 * n - 2
        _, g, hp = rho.evaluate(chart_name, X, MODE_HESS)
        H = unpack_hessian(hp, 2 * n)
        for b in range(X.shape[0]):
            grad = g[b]
            min_drho = min(min_drho, float(np.linalg.norm(grad)))
            rows = np.stack([grad, dc_from_gradient(grad)])
            _, sv, Vt = np.linalg.svd(rows)
            rank = int(np.sum(sv > rank_tol))
            basis = Vt[rank:].T  # (2n, 2n - rank)
            if basis.shape[1] != 2 * n - 2:
                raise ConvergenceError(
                    f"CR hyperplane dimension {basis.shape[1]} != {2 * n - 2} at a sample"
                )
            gm = metric_from_hessian(H[b], J)
            gm = 0.5 * (gm + gm.T)
            restricted = basis.T @ gm @ basis
            if restricted.size:
                levi_min = min(levi_min, float(np.linalg.eigvalsh(restricted)[0]))
        count += X.shape[0]
    if h_dim_expected == 0:
        levi_min = np.inf  # H_p is trivial on 2-dimensional tubes; nothing to check
    passed = (min_drho > 1e-8) and (levi_min > 0.0 if np.isfinite(levi_min) else True)
    return CRReport(
        points=pts,
        levi_min=float(levi_min) if np.isfinite(levi_min) else float("inf"),
        min_drho=float(min_drho),
        h_dim=h_dim_expected if h_dim_expected is not None else 0,
        samples=count,
        passed=passed,
    )


def dc_consistency_residual(rho: ScalarField, chart_name: str, X: np.ndarray) -> float:
    """|symbolic d^c coefficients - J^T grad(rho)| at tube samples.

    Ties the symbolic route (per-term derivative vectors, guards preserved) to
    the jet route; both agree to rounding under the fixed convention.
    """
    from .expr.jet import values_vec

    scope = rho.scope_on(chart_name)
    n = len(scope) // 2
    _, g, _ = rho.evaluate(chart_name, X, MODE_GRAD)
    route_a = dc_from_gradient(g)
    route_b = np.zeros_like(route_a)
    for term in rho.terms[chart_name]:
        mask = np.ones(X.shape[0], dtype=bool)
        for guard in term.guards:
            mask &= guard.mask(X)
        if not mask.any():
            continue
        Xm = X if mask.all() else X[mask]
        derivs = tuple(term.expr.diff(scope[n + j]) for j in range(n)) + tuple(
            -term.expr.diff(scope[j]) for j in range(n)
        )
        vals = values_vec(derivs, Xm)
        if mask.all():
            route_b += vals
        else:
            route_b[mask] += vals
    return float(np.max(np.abs(route_a - route_b)))


def holomorphy_residual(tube_exprs, base_exprs, X: np.ndarray) -> float:
    """Cauchy-Riemann + restriction residual for a declared tube extension.

    tube_exprs: 2n components (real then imaginary) over tube coordinates;
    base_exprs: the base map the extension must restrict to at y = 0.
    X: tube sample points.
    """
    from .geometry import jacobian

    m = len(tube_exprs)
    n = m // 2
    _, Jac = jacobian(tube_exprs, X)  # (B, 2n, 2n)
    Ux = Jac[:, :n, :n]
    Uy = Jac[:, :n, n:]
    Vx = Jac[:, n:, :n]
    Vy = Jac[:, n:, n:]
    res = max(float(np.max(np.abs(Ux - Vy))), float(np.max(np.abs(Uy + Vx))))
    X0 = np.array(X, copy=True)
    X0[:, n:] = 0.0
    for j in range(n):
        real_at0 = values(tube_exprs[j], X0)
        base = values(base_exprs[j], X0[:, :n]) if base_exprs is not None else None
        if base is not None:
            res = max(res, float(np.max(np.abs(real_at0 - base))))
        imag_at0 = values(tube_exprs[n + j], X0)
        res = max(res, float(np.max(np.abs(imag_at0))))
    return res
