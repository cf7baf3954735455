import math

import numpy as np
import pytest

from contactcx.complexify import newton_project, tube_scope
from contactcx.errors import DomainError, ScenarioError, UnsupportedStructureError
from contactcx.expr import parse, values
from contactcx.fields import ScalarField
from contactcx.geometry import OneForm
from contactcx.moment import (
    contact_moment,
    contact_moment_expr,
    cr_moment,
    hamiltonian_residual,
    kahler_moment,
    kahler_moment_with_gradient,
    moment_extension_residual,
    zero_level_from_param,
    zero_level_newton,
)
from contactcx.symmetry import ActionModel, GroupModel

SCOPE = ("x", "y", "z")
TS = tube_scope(SCOPE)
ETA = OneForm({"c": tuple(parse(c, SCOPE) for c in ("0", "x", "1"))})
RHO4 = ScalarField.single("c", parse("x*y_im + z_im + x_im^2 + y_im^2 + z_im^2", TS))


def _translation(axis):
    group = GroupModel(kind="translation", k=1, params=("a",))
    b = SCOPE + ("a",)
    t = TS + ("a",)
    base = tuple(parse(f"{c} + a" if c == axis else c, b) for c in SCOPE)
    tube = tuple(parse(f"{c} + a" if c == axis else c, t) for c in TS)
    return ActionModel(group=group, base_maps={"c": base}, tube_maps={"c": tube})


def _plane_rotation():
    """S^1 rotating C: tube scope (x, x_im)."""
    group = GroupModel(kind="circle_matrix", k=1, params=("a",))
    scope = ("x", "x_im", "a")
    tube = (parse("x*cos(a) - x_im*sin(a)", scope), parse("x*sin(a) + x_im*cos(a)", scope))
    base = (parse("x*cos(a)", ("x", "a")),)
    return ActionModel(group=group, base_maps={"c": base}, tube_maps={"c": tube})


def test_contact_moment_heisenberg():
    action = _translation("y")
    X = np.random.default_rng(0).uniform(-1, 1, size=(50, 3))
    mu = contact_moment(ETA, action, "c", (1.0,), X)
    assert np.allclose(mu, X[:, 0])


def test_contact_moment_z_translation_is_one():
    action = _translation("z")
    X = np.random.default_rng(1).uniform(-1, 1, size=(20, 3))
    assert np.allclose(contact_moment(ETA, action, "c", (1.0,), X), 1.0)


def test_contact_moment_torus():
    t3 = ("x", "y", "z")
    eta = OneForm({"c": tuple(parse(c, t3) for c in ("cos(z)", "sin(z)", "0"))})
    action = _translation("x")
    X = np.random.default_rng(2).uniform(0, 2 * math.pi, size=(30, 3))
    assert np.allclose(contact_moment(eta, action, "c", (1.0,), X), np.cos(X[:, 2]))


def test_contact_moment_finite_group_errors():
    group = GroupModel(
        kind="finite",
        elements=("e",),
        table={("e", "e"): "e"},
    )
    action = ActionModel(group=group, base_maps={"e": {"c": tuple(parse(c, SCOPE) for c in SCOPE)}})
    with pytest.raises(UnsupportedStructureError):
        contact_moment_expr(ETA, action, "c", (1.0,))


def test_kahler_moment_rotation_fixture():
    # rho = |z|^2, S^1 rotation: d^c rho (xi) = -2 (x^2 + y^2)
    rho = ScalarField.single("c", parse("x^2 + x_im^2", ("x", "x_im")))
    action = _plane_rotation()
    X = np.random.default_rng(3).uniform(-1, 1, size=(40, 2))
    mu = kahler_moment(rho, action, "c", (1.0,), X)
    assert np.allclose(mu, -2.0 * (X[:, 0] ** 2 + X[:, 1] ** 2))


def test_kahler_extends_contact_moment():
    action = _translation("y")
    X = np.random.default_rng(4).uniform(-1, 1, size=(200, 3))
    assert moment_extension_residual(RHO4, ETA, action, "c", X) < 1e-14


def test_kahler_moment_zero_vector():
    action = _translation("y")
    E = np.zeros((10, 6))
    assert np.allclose(kahler_moment(RHO4, action, "c", (0.0,), E), 0.0)


def test_cr_moment_requires_level_point():
    action = _translation("y")
    off = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 0.4]])  # rho = 0.4 + 0.16 there
    with pytest.raises(DomainError):
        cr_moment(RHO4, action, "c", (1.0,), off)


def test_cr_moment_on_projected_points_matches_contact():
    action = _translation("y")
    seeds = np.random.default_rng(5).uniform(-0.3, 0.3, size=(40, 6))
    P = newton_project(RHO4, "c", seeds)
    mu_cr = cr_moment(RHO4, action, "c", (1.0,), P)
    mu_k = kahler_moment(RHO4, action, "c", (1.0,), P)
    assert np.array_equal(mu_cr, mu_k)
    # on M itself the CR moment is the contact moment
    M = np.random.default_rng(6).uniform(-1, 1, size=(50, 3))
    E = np.zeros((50, 6))
    E[:, :3] = M
    assert np.allclose(cr_moment(RHO4, action, "c", (1.0,), E), M[:, 0])


def test_hamiltonian_residual_rotation_plane():
    rho = ScalarField.single("c", parse("x^2 + x_im^2", ("x", "x_im")))
    action = _plane_rotation()
    X = np.random.default_rng(7).uniform(-1, 1, size=(60, 2))
    assert hamiltonian_residual(rho, action, "c", X) < 1e-10


def test_hamiltonian_residual_heisenberg_tube():
    action = _translation("y")
    X = np.random.default_rng(8).uniform(-0.4, 0.4, size=(100, 6))
    assert hamiltonian_residual(RHO4, action, "c", X) < 1e-8


def test_zero_level_from_param_heisenberg():
    action = _translation("y")
    mu_expr = contact_moment_expr(ETA, action, "c", (1.0,))
    embed = (parse("0", ("p", "q")), parse("p", ("p", "q")), parse("q", ("p", "q")))
    P = np.random.default_rng(9).uniform(-1, 1, size=(64, 2))
    level = zero_level_from_param(embed, P, "c", [lambda X: values(mu_expr, X)])
    assert not level.empty
    assert level.max_moment < 1e-10


def test_zero_level_from_param_rejects_wrong_parameterization():
    action = _translation("y")
    mu_expr = contact_moment_expr(ETA, action, "c", (1.0,))
    embed = (parse("0.3", ("p", "q")), parse("p", ("p", "q")), parse("q", ("p", "q")))
    P = np.zeros((4, 2))
    with pytest.raises(ScenarioError):
        zero_level_from_param(embed, P, "c", [lambda X: values(mu_expr, X)])


def test_zero_level_newton_torus():
    # mu = cos z: Newton lands on z = +-pi/2
    t3 = ("x", "y", "z")
    eta = OneForm({"c": tuple(parse(c, t3) for c in ("cos(z)", "sin(z)", "0"))})
    action = _translation("x")
    mu_expr = contact_moment_expr(eta, action, "c", (1.0,))
    dmu = tuple(mu_expr.diff(v) for v in t3)

    def fn(X):
        from contactcx.geometry import eval_vector

        return values(mu_expr, X), eval_vector(dmu, X)

    seeds = np.random.default_rng(10).uniform(0.8, 2.2, size=(30, 3))
    level = zero_level_newton(seeds, "c", [fn])
    assert np.max(np.abs(np.cos(level.points[:, 2]))) < 1e-10


def test_zero_level_newton_divergence_on_constant_moment():
    from contactcx.errors import ConvergenceError
    from contactcx.geometry import eval_vector

    mu_expr = parse("1.0 + 0.0*x", SCOPE)
    dmu = tuple(mu_expr.diff(v) for v in SCOPE)

    def fn(X):
        return values(mu_expr, X), eval_vector(dmu, X)

    with pytest.raises(ConvergenceError):
        zero_level_newton(np.zeros((3, 3)), "c", [fn], max_iter=5)


def test_moment_equivariance_abelian():
    """mu_xi(psi_g x) = mu_xi(x) for sampled g (trivial coadjoint action)."""
    action = _translation("y")
    X = np.random.default_rng(12).uniform(-0.3, 0.3, size=(40, 6))
    mu = kahler_moment(RHO4, action, "c", (1.0,), X)
    for g in action.group.sample_elements():
        Y = np.array(X, copy=True)
        Y[:, 1] += g[0]
        assert np.max(np.abs(kahler_moment(RHO4, action, "c", (1.0,), Y) - mu)) < 1e-12
    rho = ScalarField.single("c", parse("x^2 + x_im^2", ("x", "x_im")))
    rot = _plane_rotation()
    Z = np.random.default_rng(13).uniform(-0.5, 0.5, size=(30, 2))
    mu0 = kahler_moment(rho, rot, "c", (1.0,), Z)
    for g in rot.group.sample_elements()[:5]:
        c, s = math.cos(g[0]), math.sin(g[0])
        R = np.array([[c, -s], [s, c]])
        assert np.max(np.abs(kahler_moment(rho, rot, "c", (1.0,), Z @ R.T) - mu0)) < 1e-12


def test_kahler_moment_gradient_matches_fd():
    action = _translation("y")
    X = np.random.default_rng(11).uniform(-0.3, 0.3, size=(10, 6))
    mu, grad = kahler_moment_with_gradient(RHO4, action, "c", (1.0,), X)
    h = 1e-6
    for i in range(6):
        up, dn = X.copy(), X.copy()
        up[:, i] += h
        dn[:, i] -= h
        fd = (kahler_moment(RHO4, action, "c", (1.0,), up) - kahler_moment(RHO4, action, "c", (1.0,), dn)) / (2 * h)
        assert np.max(np.abs(grad[:, i] - fd)) < 1e-8
