"""Contact, Kahler and CR reduction through declared cross-sections.

Quotients are realized exclusively by scenario-declared sections and
projections (catalog actions are free translations, rotations or finite, so
global sections exist).  The reduced contact form is eta_red = sigma*(iota*
eta); its defining property pi* eta_red = iota* eta is re-verified numerically
as the uniqueness certificate.  The kappa map to the complexified quotient is
never materialized; only its rank/dimension content is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError
from .expr import Expression, const, values
from .expr.nodes import Fun, Var
from .expr.tape import MODE_GRAD, MODE_HESS, unpack_hessian
from .complexify import (
    dc_from_gradient,
    ddc_from_hessian,
    imag_name,
    j_matrix,
    metric_from_hessian,
    newton_project,
    tube_scope,
)
from .fields import ScalarField
from .geometry import (
    Chart,
    OneForm,
    eval_vector,
    exterior_derivative_at,
    jacobian,
    pullback_symbolic,
    wedge_top_value,
)
from .moment import kahler_moment_with_gradient
from .symmetry import ActionModel, generator_at


@dataclass(frozen=True)
class Quotient:
    """Declared cross-section presentation of level-set / group quotient data.

    Coordinates: ``chart`` names the ambient (tube) chart; the level set is
    parameterized by ``level_chart`` through ``level_embed``; ``section`` maps
    reduced base coordinates onto the level set, ``projection`` maps ambient
    coordinates to base coordinates; pi o sigma = id.
    """

    action: ActionModel
    chart: str
    level_chart: Chart
    level_embed: tuple
    section: tuple
    projection: tuple
    base_chart: Chart
    orbit_coord_index: int = None  # ambient coordinate the group translates

    def project_embed_exprs(self) -> tuple:
        """pi o iota: level parameters -> base coordinates (Expressions)."""
        out = []
        for p in self.projection:
            table = {name: self.level_embed[k] for k, name in enumerate(p.scope)}
            out.append(p.subst(table, scope=self.level_chart.coords))
        return tuple(out)


@dataclass
class ReducedContact:
    coeffs: tuple  # eta_red coefficient Expressions over the base chart scope
    defining_residual: float
    samples: int


@dataclass
class ReducedKahler:
    rho_red: ScalarField
    defining_residual: float
    min_eig: float
    samples: int


def _covector_pullback(map_exprs, X, covector_at):
    """(F* c)(X) = DF(X)^T c(F(X)) for a numeric covector field ``covector_at``."""
    FX, DF = jacobian(map_exprs, X)
    c = covector_at(FX)
    return np.einsum("bmn,bm->bn", DF, c)


def quotient_consistency(q: Quotient, base_samples: np.ndarray, level_samples: np.ndarray, tube: bool = False, tol: float = 1e-10, orbit_tol: float = 1e-8) -> float:
    """pi o sigma = id on base samples; sigma(pi(p)) stays on the orbit of p."""
    S = eval_vector(q.section, base_samples)
    PS = eval_vector(q.projection, S)
    res = float(np.max(np.abs(PS - base_samples))) if base_samples.size else 0.0
    if res > tol:
        raise ScenarioError(f"pi o sigma differs from identity by {res:.3e}", "quotient")
    P = eval_vector(q.level_embed, level_samples)
    QP = eval_vector(q.section, eval_vector(q.projection, P))
    group = q.action.group
    worst = 0.0
    if group.is_finite:
        for b in range(P.shape[0]):
            best = math.inf
            for g in group.elements:
                moved = q.action.apply(q.chart, QP[b : b + 1], g, tube=tube)[0]
                best = min(best, float(np.max(np.abs(moved - P[b]))))
            worst = max(worst, best)
    elif q.orbit_coord_index is not None:
        i = q.orbit_coord_index
        delta = P[:, i] - QP[:, i]
        for b in range(P.shape[0]):
            g = (float(delta[b]),) + (0.0,) * (group.k - 1)
            moved = q.action.apply(q.chart, QP[b : b + 1], g, tube=tube)[0]
            worst = max(worst, float(np.max(np.abs(moved - P[b]))))
    else:
        raise ScenarioError("quotient needs orbit_coord_index for continuous groups", "quotient")
    if worst > orbit_tol:
        raise ScenarioError(f"sigma(pi(p)) leaves the orbit by {worst:.3e}", "quotient")
    return max(res, worst)


def contact_reduce(eta: OneForm, q: Quotient, level_samples: np.ndarray, residual_cap: float = 1e-6) -> ReducedContact:
    """eta_red := sigma*(iota* eta); certifies pi*(eta_red) = iota*(eta)."""
    base_scope = q.base_chart.coords
    coeffs = pullback_symbolic(q.section, eta.on(q.chart), base_scope)
    residual = defining_residual(eta, q, coeffs, level_samples)
    if residual >= residual_cap:
        raise ScenarioError(
            f"contact reduction defining residual {residual:.3e} >= {residual_cap:.1e} "
            "(wrong section or non-invariant form)",
            "quotient.section",
        )
    return ReducedContact(coeffs=coeffs, defining_residual=residual, samples=level_samples.shape[0])


def defining_residual(eta: OneForm, q: Quotient, red_coeffs, level_samples: np.ndarray) -> float:
    """max |pi~*(eta_red) - iota*(eta)| coefficient-wise at level parameter samples."""
    iota_eta = _covector_pullback(q.level_embed, level_samples, lambda FX: eta.at(q.chart, FX))
    pe = q.project_embed_exprs()
    pi_eta_red = _covector_pullback(pe, level_samples, lambda QX: np.stack([values(c, QX) for c in red_coeffs], axis=-1))
    return float(np.max(np.abs(pi_eta_red - iota_eta)))


def perturbation_certificate(eta: OneForm, q: Quotient, red: ReducedContact, level_samples: np.ndarray, eps: float = 1e-3) -> float:
    """min over base coordinate forms of the residual raised by eta_red + eps dq_i.

    The reduced form is pinned by the defining property: each perturbation must
    push the residual above eps/2 somewhere.
    """
    base_scope = q.base_chart.coords
    worst_min = math.inf
    for i in range(len(base_scope)):
        pert = list(red.coeffs)
        pert[i] = pert[i] + const(eps, base_scope)
        r = defining_residual(eta, q, tuple(pert), level_samples)
        worst_min = min(worst_min, r)
    return worst_min


def section_independence_residual(eta: OneForm, q: Quotient, alt_section, level_samples: np.ndarray) -> float:
    """Two declared sections must reduce to the same form (base reparameterization
    between them is the identity in catalog scenarios)."""
    base_scope = q.base_chart.coords
    a = pullback_symbolic(q.section, eta.on(q.chart), base_scope)
    b = pullback_symbolic(tuple(alt_section), eta.on(q.chart), base_scope)
    QX = eval_vector(q.project_embed_exprs(), level_samples)
    va = np.stack([values(c, QX) for c in a], axis=-1)
    vb = np.stack([values(c, QX) for c in b], axis=-1)
    return float(np.max(np.abs(va - vb)))


def kahler_reduce(rho: ScalarField, q: Quotient, level_samples: np.ndarray, tube_samples: np.ndarray) -> ReducedKahler:
    """rho_red := rho o sigma on the reduced tube chart; verifies the defining
    identity rho_red o pi = rho o iota on the level and positivity of -dd^c."""
    base_scope = q.base_chart.coords
    sec_table = {name: q.section[k] for k, name in enumerate(rho.scope_on(q.chart))}
    rho_red = rho.pullback_through(q.chart, sec_table, q.base_chart.name, base_scope)

    P = eval_vector(q.level_embed, level_samples)
    up = _field_values(rho, q.chart, P)
    QX = eval_vector(q.project_embed_exprs(), level_samples)
    down = _field_values(rho_red, q.base_chart.name, QX)
    residual = float(np.max(np.abs(up - down))) if level_samples.size else 0.0

    nb = len(base_scope) // 2
    J = j_matrix(nb)
    _, _, hp = rho_red.evaluate(q.base_chart.name, tube_samples, MODE_HESS)
    H = unpack_hessian(hp, 2 * nb)
    min_eig = math.inf
    for b in range(tube_samples.shape[0]):
        g = metric_from_hessian(H[b], J)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (g + g.T))[0]))
    return ReducedKahler(rho_red=rho_red, defining_residual=residual, min_eig=float(min_eig), samples=level_samples.shape[0] + tube_samples.shape[0])


def _field_values(f: ScalarField, chart_name: str, X: np.ndarray) -> np.ndarray:
    return f.values(chart_name, X)


@dataclass
class CompatibilityReport:
    form_residual: float
    omega_residual: float
    samples: int


def compatibility_check(rho_red: ScalarField, red: ReducedContact, contact_embed, base_samples: np.ndarray, reduced_chart_name: str) -> CompatibilityReport:
    """iota*(d^c rho_red) = eta_red and d eta_red = iota*(dd^c rho_red).

    ``contact_embed``: Expressions placing the reduced contact base into the
    reduced tube chart (imaginary parts zero).
    """
    E, DE = jacobian(contact_embed, base_samples)
    m = E.shape[1]
    J = j_matrix(m // 2)
    _, g, hp = rho_red.evaluate(reduced_chart_name, E, MODE_HESS)
    dc = dc_from_gradient(g)
    pulled = np.einsum("bmn,bm->bn", DE, dc)
    eta_vals = np.stack([values(c, base_samples) for c in red.coeffs], axis=-1)
    form_res = float(np.max(np.abs(pulled - eta_vals)))

    H = unpack_hessian(hp, m)
    ddc = ddc_from_hessian(H, J)
    pulled2 = np.einsum("bmi,bmn,bnj->bij", DE, ddc, DE)
    d_eta = exterior_derivative_at(red.coeffs, base_samples)
    omega_res = float(np.max(np.abs(pulled2 - d_eta)))
    return CompatibilityReport(form_residual=form_res, omega_residual=omega_res, samples=base_samples.shape[0])


@dataclass
class CRReduceReport:
    min_contact: float
    form_residual: float
    upstairs_residual: float
    samples: int


def cr_reduce(rho_red: ScalarField, red: ReducedContact, q: Quotient, reduced_chart_name: str, seeds: np.ndarray, contact_embed, base_samples: np.ndarray, rho: ScalarField = None, level_tube_points: np.ndarray = None) -> CRReduceReport:
    """(rho_red)^(-1)(0): contact top-wedge of the pulled-back form, reduced-M
    matching, and agreement with the upstairs CR form through the section."""
    m = seeds.shape[1]
    J = j_matrix(m // 2)
    X = newton_project(rho_red, reduced_chart_name, seeds)
    _, g, hp = rho_red.evaluate(reduced_chart_name, X, MODE_HESS)
    H = unpack_hessian(hp, m)
    min_contact = math.inf
    for b in range(X.shape[0]):
        grad = g[b]
        _, sv, Vt = np.linalg.svd(grad[None, :])
        basis = Vt[1:].T
        dc = dc_from_gradient(grad)
        ddc = ddc_from_hessian(H[b], J)
        w = wedge_top_value(basis.T @ dc, basis.T @ ddc @ basis)
        min_contact = min(min_contact, abs(float(w)))

    # reduced M sits inside (rho_red)^{-1}(0) and carries eta_red
    E, DE = jacobian(contact_embed, base_samples)
    v0 = rho_red.values(reduced_chart_name, E)
    _, g0, _ = rho_red.evaluate(reduced_chart_name, E, MODE_GRAD)
    pulled = np.einsum("bmn,bm->bn", DE, dc_from_gradient(g0))
    eta_vals = np.stack([values(c, base_samples) for c in red.coeffs], axis=-1)
    form_res = max(float(np.max(np.abs(v0))), float(np.max(np.abs(pulled - eta_vals))))

    upstairs = 0.0
    if rho is not None and level_tube_points is not None and level_tube_points.size:
        upstairs = _upstairs_cr_residual(rho, rho_red, q, reduced_chart_name, level_tube_points)
    return CRReduceReport(min_contact=float(min_contact), form_residual=form_res, upstairs_residual=upstairs, samples=X.shape[0] + base_samples.shape[0])


def _upstairs_cr_residual(rho: ScalarField, rho_red: ScalarField, q: Quotient, reduced_chart_name: str, level_points: np.ndarray) -> float:
    """On mu^{-1}(0) cap rho^{-1}(0): pi*(d^c rho_red) = d^c rho as covectors.

    Both vanish on orbit and J-orbit directions at joint-level points, so the
    full-covector comparison is exact there; seeds are projected onto both
    levels first.
    """
    P = _project_joint(rho, q, level_points)
    _, g, _ = rho.evaluate(q.chart, P, MODE_GRAD)
    dc_up = dc_from_gradient(g)
    PX, DP = jacobian(q.projection, P)
    _, gr, _ = rho_red.evaluate(reduced_chart_name, PX, MODE_GRAD)
    dc_dn = dc_from_gradient(gr)
    pulled = np.einsum("bmn,bm->bn", DP, dc_dn)
    return float(np.max(np.abs(pulled - dc_up)))


def _project_joint(rho: ScalarField, q: Quotient, seeds: np.ndarray, tol: float = 1e-11, max_iter: int = 50) -> np.ndarray:
    """Newton onto rho = 0 and mu_xi = 0 jointly."""
    X = np.array(seeds, dtype=np.float64, copy=True)
    basis = q.action.lie_basis()
    for _ in range(max_iter):
        v, g, _ = rho.evaluate(q.chart, X, MODE_GRAD)
        rows = [v]
        grads = [g]
        for xi in basis:
            mu, gr = kahler_moment_with_gradient(rho, q.action, q.chart, xi, X)
            rows.append(mu)
            grads.append(gr)
        F = np.stack(rows, axis=1)  # (B, 1 + k)
        if np.all(np.abs(F) <= tol):
            return X
        G = np.stack(grads, axis=1)  # (B, 1 + k, m)
        for b in range(X.shape[0]):
            step, *_ = np.linalg.lstsq(G[b], F[b], rcond=None)
            X[b] -= step
    from .errors import ConvergenceError

    raise ConvergenceError("joint level projection did not converge")


@dataclass
class SymplectifyProduct:
    """M x R with tube M^c x C and the lifted potential rho_hat.

    rho_hat(m, z) = e^{Re z} rho_M(m) + lam * (nu(m) + |z|^2); the quadratic
    tail is the convexifier of the product (nu(m) + t^2 + s^2 vanishes to
    second order in d^c-pullbacks on M x R).
    """

    chart: Chart  # product base chart (base coords + t)
    tube_chart: Chart
    rho_hat: ScalarField
    t_index: int


def symplectify(base_chart: Chart, rho_m: Expression, nu: Expression, lam: float = 1.0, t_name: str = "t", t_box=(-1.0, 1.0), radius: float = 0.5) -> SymplectifyProduct:
    """Lift a single-chart extension potential to the symplectization tube."""
    if t_name in base_chart.coords:
        raise ScenarioError(f"coordinate name '{t_name}' already used by the base chart")
    coords = base_chart.coords + (t_name,)
    prod = Chart(
        name=base_chart.name + "_x_R",
        coords=coords,
        lo=base_chart.lo + (float(t_box[0]),),
        hi=base_chart.hi + (float(t_box[1]),),
        periodic=base_chart.periodic + (False,),
    )
    scope = tube_scope(coords)
    n1 = len(coords)
    tprod = Chart(
        name=prod.name,
        coords=scope,
        lo=prod.lo + (-radius,) * n1,
        hi=prod.hi + (radius,) * n1,
        periodic=prod.periodic + (False,) * n1,
    )
    t = Expression(Var(t_name), scope)
    s = Expression(Var(imag_name(t_name)), scope)
    exp_t = Expression(Fun("exp", t.root), scope)
    rho_hat = exp_t * rho_m.rescope(scope) + lam * (nu.rescope(scope) + t * t + s * s)
    return SymplectifyProduct(
        chart=prod,
        tube_chart=tprod,
        rho_hat=ScalarField.single(prod.name, rho_hat),
        t_index=n1 - 1,
    )


@dataclass
class SymplectifyReport:
    dd_residual: float  # iota*_{MxR}(dd^c rho_hat) vs d(e^t eta + dt)
    form_residual: float  # iota*_M iota*_{M^c}(d^c rho_hat) vs eta
    samples: int


def symplectify_identities(prod: SymplectifyProduct, eta: OneForm, base_chart: Chart, MR_samples: np.ndarray) -> SymplectifyReport:
    """Verify the two displayed symplectification identities at M x R samples.

    MR_samples: (B, n+1) points (base coords, t).
    """
    n1 = prod.chart.dim
    n = n1 - 1
    B = MR_samples.shape[0]
    E = np.zeros((B, 2 * n1))
    E[:, :n1] = MR_samples
    _, g, hp = prod.rho_hat.evaluate(prod.chart.name, E, MODE_HESS)
    J = j_matrix(n1)
    H = unpack_hessian(hp, 2 * n1)
    Xb = MR_samples[:, :n]
    tvals = MR_samples[:, n]
    eta_vals = eta.at(base_chart.name, Xb)
    d_eta = exterior_derivative_at(eta.on(base_chart.name), Xb)
    dd_res = 0.0
    for b in range(B):
        lhs = ddc_from_hessian(H[b], J)[:n1, :n1]
        rhs = np.zeros((n1, n1))
        et = math.exp(tvals[b])
        rhs[:n, :n] = et * d_eta[b]
        rhs[n, :n] = et * eta_vals[b]
        rhs[:n, n] = -et * eta_vals[b]
        dd_res = max(dd_res, float(np.max(np.abs(lhs - rhs))))

    # t = 0, s = 0 slice: iota_M^* iota_{M^c}^* (d^c rho_hat) = eta
    E0 = np.array(E, copy=True)
    E0[:, n] = 0.0
    _, g0, _ = prod.rho_hat.evaluate(prod.chart.name, E0, MODE_GRAD)
    dc0 = dc_from_gradient(g0)
    form_res = float(np.max(np.abs(dc0[:, :n] - eta_vals)))
    return SymplectifyReport(dd_residual=dd_res, form_residual=form_res, samples=B)


@dataclass
class KappaRankReport:
    ker_dim: int
    complement_dim: int
    rank: int
    min_sv: float
    samples: int


def kappa_rank_check(rho: ScalarField, q: Quotient, level_points: np.ndarray, svd_tol: float = 1e-8) -> KappaRankReport:
    """Rank content of the local-diffeomorphism statement for kappa.

    At level samples: (i) dim ker d mu = dim M^c - k, (ii) the omega-orthogonal
    complement of the complexified orbit inside ker d mu has dimension
    dim M^c - 2k, (iii) D(pi o iota) restricted to it has full rank.
    """
    m = level_points.shape[1]
    J = j_matrix(m // 2)
    k = q.action.group.k
    ker_dims, comp_dims, ranks = set(), set(), set()
    min_sv = math.inf
    _, g, hp = rho.evaluate(q.chart, level_points, MODE_HESS)
    H = unpack_hessian(hp, m)
    _, DP = jacobian(q.projection, level_points)
    for b in range(level_points.shape[0]):
        X = level_points[b : b + 1]
        mu_grads = []
        orbit = []
        for xi in q.action.lie_basis():
            _, gr = kahler_moment_with_gradient(rho, q.action, q.chart, xi, X)
            mu_grads.append(gr[0])
            gen = generator_at(q.action, q.chart, xi, X, tube=True)[0]
            orbit.append(gen)
            orbit.append(J @ gen)
        dmu = np.stack(mu_grads)  # (k, m)
        _, sv, _ = np.linalg.svd(dmu)
        ker_dims.add(m - int(np.sum(sv > svd_tol)))
        omega = -ddc_from_hessian(H[b], J)
        rows = np.stack(orbit) @ omega  # (2k, m)
        stacked = np.vstack([dmu, rows])
        _, sv2, Vt2 = np.linalg.svd(stacked)
        rank2 = int(np.sum(sv2 > svd_tol))
        W = Vt2[rank2:].T  # complement inside ker d mu
        comp_dims.add(W.shape[1])
        M = DP[b] @ W
        sv3 = np.linalg.svd(M, compute_uv=False)
        ranks.add(int(np.sum(sv3 > svd_tol)))
        if sv3.size:
            min_sv = min(min_sv, float(sv3[min(len(sv3) - 1, W.shape[1] - 1)]))
    if len(ker_dims) != 1 or len(comp_dims) != 1 or len(ranks) != 1:
        raise ScenarioError(f"kappa rank data not constant over samples: {ker_dims}, {comp_dims}, {ranks}")
    return KappaRankReport(
        ker_dim=ker_dims.pop(),
        complement_dim=comp_dims.pop(),
        rank=ranks.pop(),
        min_sv=float(min_sv),
        samples=level_points.shape[0],
    )
