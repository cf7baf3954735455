"""Contact, Kahler and CR moment maps; Hamiltonian identity; zero levels.

Contact: mu_xi(m) = eta(xi_M(m)).  Kahler: mu_xi(x) = d^c rho(xi_{M^c}(x)),
which restricts to the contact moment on M and, on rho^{-1}(0), is the CR
moment map under the line-bundle trivialization alpha_p(v) -> d^c rho(v).
Finite groups have an empty moment map; their zero level is all of M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, ScenarioError, UnsupportedStructureError
from .expr import Expression, const, values
from .expr.tape import MODE_GRAD, MODE_HESS, unpack_hessian
from .complexify import dc_from_gradient, ddc_from_hessian, j_matrix
from .fields import ScalarField
from .geometry import OneForm, eval_vector, jacobian
from .symmetry import ActionModel, generator_at


def contact_moment_expr(eta: OneForm, action: ActionModel, chart_name: str, xi) -> Expression:
    """mu_xi = eta(xi_M) as an Expression over the chart coordinates."""
    if action.group.is_finite:
        raise UnsupportedStructureError("finite groups have an empty contact moment map")
    gen = action.generator_exprs(chart_name, xi)
    coeffs = eta.on(chart_name)
    scope = coeffs[0].scope
    acc = const(0.0, scope)
    for a, g in zip(coeffs, gen):
        acc = acc + a * g.rescope(scope)
    return acc


def contact_moment(eta: OneForm, action: ActionModel, chart_name: str, xi, X: np.ndarray) -> np.ndarray:
    return values(contact_moment_expr(eta, action, chart_name, xi), X)


def kahler_moment(rho: ScalarField, action: ActionModel, chart_name: str, xi, X: np.ndarray) -> np.ndarray:
    """mu_xi = d^c rho (xi_{M^c}) at tube points."""
    _, g, _ = rho.evaluate(chart_name, X, MODE_GRAD)
    dc = dc_from_gradient(g)
    gen = generator_at(action, chart_name, xi, X, tube=True)
    return np.sum(dc * gen, axis=1)


def kahler_moment_with_gradient(rho: ScalarField, action: ActionModel, chart_name: str, xi, X: np.ndarray):
    """(mu, grad mu) at tube points; grad mu = H J xi + (D xi)^T J^T grad rho."""
    m = X.shape[1]
    J = j_matrix(m // 2)
    _, g, hp = rho.evaluate(chart_name, X, MODE_HESS)
    H = unpack_hessian(hp, m)
    gen_exprs = action.generator_exprs(chart_name, xi, tube=True)
    gen, Dgen = jacobian(gen_exprs, X)
    dc = dc_from_gradient(g)
    mu = np.sum(dc * gen, axis=1)
    grad = np.einsum("bij,bj->bi", H @ J, gen) + np.einsum("bji,bj->bi", Dgen, dc)
    return mu, grad


def cr_moment(rho: ScalarField, action: ActionModel, chart_name: str, xi, X: np.ndarray, level_tol: float = 1e-8) -> np.ndarray:
    """Kahler moment restricted to rho^{-1}(0); errors off the level set."""
    v = rho.values(chart_name, X)
    worst = float(np.max(np.abs(v))) if v.size else 0.0
    if worst > level_tol:
        raise DomainError(f"point off the CR hypersurface: |rho| = {worst:.3e} > {level_tol:.1e}")
    return kahler_moment(rho, action, chart_name, xi, X)


def hamiltonian_residual(rho: ScalarField, action: ActionModel, chart_name: str, X: np.ndarray) -> float:
    """max |d mu_xi(v) - omega(xi, v)| over samples, basis xi, coordinate v."""
    m = X.shape[1]
    J = j_matrix(m // 2)
    _, g, hp = rho.evaluate(chart_name, X, MODE_HESS)
    H = unpack_hessian(hp, m)
    worst = 0.0
    for xi in action.lie_basis():
        gen_exprs = action.generator_exprs(chart_name, xi, tube=True)
        gen, Dgen = jacobian(gen_exprs, X)
        dc = dc_from_gradient(g)
        grad_mu = np.einsum("bij,bj->bi", H @ J, gen) + np.einsum("bji,bj->bi", Dgen, dc)
        omega = -ddc_from_hessian(H, J)
        iota = np.einsum("bk,bki->bi", gen, omega)
        worst = max(worst, float(np.max(np.abs(grad_mu - iota))))
    return worst


def moment_extension_residual(rho: ScalarField, eta: OneForm, action: ActionModel, chart_name: str, M_samples: np.ndarray) -> float:
    """|mu_{M^c} o iota_M - mu_M| at base samples, max over the Lie basis."""
    n = M_samples.shape[1]
    E = np.zeros((M_samples.shape[0], 2 * n))
    E[:, :n] = M_samples
    worst = 0.0
    for xi in action.lie_basis():
        km = kahler_moment(rho, action, chart_name, xi, E)
        cm = contact_moment(eta, action, chart_name, xi, M_samples)
        worst = max(worst, float(np.max(np.abs(km - cm))))
    return worst


def tangency_residual(rho: ScalarField, action: ActionModel, chart_name: str, xis, M_samples: np.ndarray) -> float:
    """max |d/dt rho(exp(i t zeta) p)|_0| = |d^c rho(zeta)| over compact generators.

    Vacuous (0.0) when ``xis`` is empty, e.g. a trivial maximal compact factor.
    """
    if not xis:
        return 0.0
    n = M_samples.shape[1]
    E = np.zeros((M_samples.shape[0], 2 * n))
    E[:, :n] = M_samples
    worst = 0.0
    for xi in xis:
        mu = kahler_moment(rho, action, chart_name, xi, E)
        worst = max(worst, float(np.max(np.abs(mu))))
    return worst


@dataclass
class ZeroLevel:
    """Sampled momentum zero level, possibly empty (reported, not an error)."""

    chart: str
    points: np.ndarray  # (B, dim) in the chart (or tube chart) coordinates
    empty: bool
    max_moment: float


def zero_level_from_param(embed_exprs, param_samples: np.ndarray, chart_name: str, moment_fns, tol: float = 1e-10) -> ZeroLevel:
    """Closed-form level: embed parameter samples, verify every |mu_xi| < tol."""
    X = eval_vector(embed_exprs, param_samples)
    worst = 0.0
    for fn in moment_fns:
        worst = max(worst, float(np.max(np.abs(fn(X)))) if X.size else 0.0)
    if worst > tol:
        raise ScenarioError(f"declared level parameterization misses mu = 0 by {worst:.3e}", "quotient.level")
    return ZeroLevel(chart=chart_name, points=X, empty=X.shape[0] == 0, max_moment=worst)


def zero_level_newton(seeds: np.ndarray, chart_name: str, moment_with_grad_fns, tol: float = 1e-10, max_iter: int = 50) -> ZeroLevel:
    """Project seeds onto the joint zero level of the given moment components."""
    X = np.array(seeds, dtype=np.float64, copy=True)
    for _ in range(max_iter):
        mus, grads = [], []
        for fn in moment_with_grad_fns:
            mu, gr = fn(X)
            mus.append(mu)
            grads.append(gr)
        mu = np.stack(mus, axis=1)  # (B, k)
        if np.all(np.abs(mu) <= tol):
            return ZeroLevel(chart=chart_name, points=X, empty=X.shape[0] == 0, max_moment=float(np.max(np.abs(mu))) if mu.size else 0.0)
        G = np.stack(grads, axis=1)  # (B, k, m)
        for b in range(X.shape[0]):
            step, *_ = np.linalg.lstsq(G[b], mu[b], rcond=None)
            X[b] -= step
    mus = [fn(X)[0] for fn in moment_with_grad_fns]
    worst = float(np.max(np.abs(np.stack(mus)))) if mus else 0.0
    if worst <= tol:
        return ZeroLevel(chart=chart_name, points=X, empty=False, max_moment=worst)
    raise ConvergenceError(f"zero-level Newton stalled at |mu| = {worst:.3e}")
