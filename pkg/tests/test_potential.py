import math

import numpy as np
import pytest

from contactcx.complexify import complexify, dc_from_gradient, spsh_check, tube_scope
from contactcx.errors import ContactcxError
from contactcx.expr import parse, values
from contactcx.expr.tape import MODE_GRAD
from contactcx.fields import ScalarField
from contactcx.geometry import Atlas, OneForm, Transition, chart
from contactcx.potential import (
    Bump,
    PartitionOfUnity,
    average,
    convexifier_field,
    convexify,
    frame_decompose,
    frame_reconstruction_residual,
    local_potential,
    patch,
    product_potential,
)
from contactcx.sampling import lattice
from contactcx.symmetry import ActionModel, GroupModel
from contactcx.moment import tangency_residual

TWO_PI = 2.0 * math.pi


def _pullback_residual(field, chart_name, M_samples, eta_vals):
    n = M_samples.shape[1]
    E = np.zeros((M_samples.shape[0], 2 * n))
    E[:, :n] = M_samples
    _, g, _ = field.evaluate(chart_name, E, MODE_GRAD)
    return float(np.max(np.abs(dc_from_gradient(g)[:, :n] - eta_vals)))


def test_local_potential_constant_coefficient():
    rho = local_potential(("x",), (parse("1", ("x",)),))
    assert str(rho) == "x_im"


def test_local_potential_x_dy():
    rho = local_potential(("x", "y"), (parse("0", ("x", "y")), parse("x", ("x", "y"))))
    X = np.array([[0.5, -0.2]])
    f = ScalarField.single("c", rho)
    res = _pullback_residual(f, "c", X, np.array([[0.0, 0.5]]))
    assert res < 1e-15


def test_local_potential_heisenberg_formula():
    scope = ("x", "y", "z")
    rho = local_potential(scope, tuple(parse(c, scope) for c in ("0", "x", "1")))
    # rho = w + x v with w, v the imaginary partners of z, y
    ts = tube_scope(scope)
    vals = values(rho.rescope(ts), np.array([[0.1, 0.2, 0.3, 0.0, 0.7, 0.9]]))
    assert vals[0] == pytest.approx(0.9 + 0.1 * 0.7)


def test_patch_trivial_partition_is_identity():
    scope = ("x",)
    rho = local_potential(scope, (parse("1", scope),))
    atlas = Atlas({"c": chart("c", ["x"], [(-1, 1)])})
    bump = Bump(chart="c", center=(0.0,), halfwidth=(2.0,))
    part = PartitionOfUnity(atlas=atlas, bumps=(bump,))
    field = patch({bump: rho}, part)
    X = np.array([[0.3], [0.9]])
    E = np.c_[X, np.array([[0.25], [0.5]])]
    direct = ScalarField.single("c", rho)
    assert np.allclose(field.values("c", E), direct.values("c", E))


def _arc_circle_atlas():
    """Two overlapping arc charts on S^1 with two-component transitions."""
    w = 2.2
    a = chart("a", ["t"], [(-w, w)])
    b = chart("b", ["u"], [(math.pi - w, math.pi + w)])

    def affine(name, src, dst, var, shift, inverse):
        scope = (var,)
        expr = parse(f"{var} + {shift}" if shift else var, scope)
        tube = (
            parse(f"{var} + {shift}" if shift else var, tube_scope(scope)),
            parse(f"{var}_im", tube_scope(scope)),
        )
        return Transition(name=name, src=src, dst=dst, exprs=(expr,), inverse=inverse, tube_exprs=tube)

    ts = (
        affine("ab1", "a", "b", "t", 0.0, "ba1"),
        affine("ba1", "b", "a", "u", 0.0, "ab1"),
        affine("ab2", "a", "b", "t", TWO_PI, "ba2"),
        affine("ba2", "b", "a", "u", -TWO_PI, "ab2"),
    )
    return Atlas({"a": a, "b": b}, ts)


def test_patch_two_overlapping_charts_on_circle():
    """The patched potential keeps iota* d^c rho = d theta across both charts."""
    atlas = _arc_circle_atlas()
    bump_a = Bump(chart="a", center=(0.0,), halfwidth=(1.8,))
    bump_b = Bump(chart="b", center=(math.pi,), halfwidth=(1.8,))
    part = PartitionOfUnity(atlas=atlas, bumps=(bump_a, bump_b))
    locals_ = {
        bump_a: local_potential(("t",), (parse("1", ("t",)),)),
        bump_b: local_potential(("u",), (parse("1", ("u",)),)),
    }
    samples = {
        "a": lattice(atlas.chart("a"), 256, jitter=0.0, seed=1, margin=0.02),
        "b": lattice(atlas.chart("b"), 256, jitter=0.0, seed=1, margin=0.02),
    }
    rho = patch(locals_, part, samples=samples)
    for name in ("a", "b"):
        res = _pullback_residual(rho, name, samples[name], np.ones((256, 1)))
        assert res < 1e-8
        E = np.c_[samples[name], np.zeros((256, 1))]
        assert np.max(np.abs(rho.values(name, E))) < 1e-12
    # patching locality: where only chi_a is supported, rho equals rho_a
    E0 = np.array([[0.0, 0.37]])  # t = 0 is outside bump_b's support
    assert rho.values("a", E0)[0] == pytest.approx(0.37, abs=1e-15)


def test_patch_cover_gap_detected():
    atlas = Atlas({"c": chart("c", ["x"], [(-1, 1)])})
    bumps = (
        Bump(chart="c", center=(-0.6, ), halfwidth=(0.3,)),
        Bump(chart="c", center=(0.6,), halfwidth=(0.3,)),
    )
    part = PartitionOfUnity(atlas=atlas, bumps=bumps)
    locals_ = {b: local_potential(("x",), (parse("1", ("x",)),)) for b in bumps}
    samples = {"c": lattice(atlas.chart("c"), 64, jitter=0.0, seed=1)}
    with pytest.raises(ContactcxError):
        patch(locals_, part, samples=samples)


def test_convexifier_pullback_vanishes_exactly():
    scope = ("x", "y", "z")
    nu = convexifier_field(chart_name="c", base_coords=scope)
    X = np.random.default_rng(0).uniform(-1, 1, size=(1000, 3))
    res = _pullback_residual(nu, "c", X, np.zeros((1000, 3)))
    assert res < 1e-12
    E = np.zeros((1000, 6))
    E[:, :3] = X
    assert np.max(np.abs(nu.values("c", E))) == 0.0


def test_convexify_lambda_zero_is_identity():
    scope = ("x",)
    rho = ScalarField.single("c", local_potential(scope, (parse("1", scope),)))
    nu = convexifier_field(chart_name="c", base_coords=scope)
    assert convexify(rho, nu, 0.0) is rho


def test_convexify_makes_heisenberg_spsh():
    scope = ("x", "y", "z")
    rho = ScalarField.single("c", local_potential(scope, tuple(parse(c, scope) for c in ("0", "x", "1"))))
    nu = convexifier_field(chart_name="c", base_coords=scope)
    X = np.random.default_rng(1).uniform(-0.4, 0.4, size=(300, 6))
    X[:, :3] *= 2.0
    rep = spsh_check(convexify(rho, nu, 1.0), {"c": X})
    assert rep.min_eig == pytest.approx(1.0)  # 2 lambda - 1


def _circle_action():
    group = GroupModel(kind="torus", k=1, params=("a",))
    scope = ("th", "a")
    tscope = ("th", "th_im", "a")
    return ActionModel(
        group=group,
        base_maps={"c": (parse("th + a", scope),)},
        tube_maps={"c": (parse("th + a", tscope), parse("th_im", tscope))},
    )


def test_average_quadrature_oracle_cos_squared():
    # (1/2 pi) int cos^2 = 1/2, reproduced to 1e-12 by 64 trapezoid nodes
    action = _circle_action()
    f = ScalarField.single("c", parse("cos(th)^2", ("th", "th_im")))
    avg = average(f, action, 64)
    X = np.array([[0.0, 0.0], [1.1, 0.0], [4.0, 0.0]])
    assert np.max(np.abs(avg.values("c", X) - 0.5)) < 1e-12


def test_average_idempotent_and_constant_fixed():
    action = _circle_action()
    f = ScalarField.single("c", parse("3.5", ("th", "th_im")))
    avg = average(f, action, 16)
    X = np.array([[0.2, 0.1]])
    assert avg.values("c", X)[0] == pytest.approx(3.5)
    g = ScalarField.single("c", parse("sin(th) + cos(th)^2", ("th", "th_im")))
    once = average(g, action, 32)
    twice = average(once, action, 32)
    assert np.max(np.abs(once.values("c", X) - twice.values("c", X))) < 1e-12


def test_average_finite_symmetrization_exact():
    group = GroupModel(
        kind="finite",
        elements=("e", "s"),
        table={("e", "e"): "e", ("e", "s"): "s", ("s", "e"): "s", ("s", "s"): "e"},
    )
    scope = tube_scope(("x", "y", "z"))
    maps = {
        "e": {"c": tuple(parse(c, scope) for c in ("x", "y", "z", "x_im", "y_im", "z_im"))},
        "s": {"c": tuple(parse(c, scope) for c in ("-x", "-y", "z", "-x_im", "-y_im", "z_im"))},
    }
    base = {
        g: {"c": tuple(parse(c, ("x", "y", "z")) for c in v)}
        for g, v in (("e", ("x", "y", "z")), ("s", ("-x", "-y", "z")))
    }
    action = ActionModel(group=group, base_maps=base, tube_maps=maps)
    rho = ScalarField.single("c", parse("x*y_im + z_im + x_im^2 + y_im^2 + z_im^2", scope))
    avg = average(rho, action)
    X = np.random.default_rng(3).uniform(-0.4, 0.4, size=(64, 6))
    moved = np.array(X, copy=True)
    moved[:, [0, 1, 3, 4]] *= -1.0
    assert np.max(np.abs(avg.values("c", X) - avg.values("c", moved))) < 1e-14


def test_average_spectral_decay_on_noninvariant_input():
    action = _circle_action()
    f = ScalarField.single("c", parse("bump(wrap(th)/2.5)", ("th", "th_im")))
    X = np.linspace(0, TWO_PI, 40, endpoint=False).reshape(-1, 1)
    X = np.c_[X, np.zeros((40, 1))]

    def inv_residual(n):
        avg = average(f, action, n)
        vals = avg.values("c", X)
        return float(np.max(vals) - np.min(vals))

    r16, r64 = inv_residual(16), inv_residual(64)
    assert r64 < r16 * 1e-3  # spectral, not algebraic, decay in the node count
    assert r64 < 1e-7


ETA3 = ("0", "x", "1")  # dz + x dy over (x, y, z)


def test_frame_decompose_y_translation():
    scope = ("x", "y", "z")
    eta = OneForm({"c": tuple(parse(c, scope) for c in ETA3)})
    fd = frame_decompose(eta, "c", g_coords=("y",), s_coords=("x", "z"))
    assert [str(f) for f in fd.f] == ["x"]
    assert [str(s) for s in fd.sigma] == ["0.0", "1.0"]
    X = np.random.default_rng(0).uniform(-1, 1, size=(200, 3))
    assert frame_reconstruction_residual(fd, eta, X) < 1e-12


def test_frame_decompose_z_translation():
    scope = ("x", "y", "z")
    eta = OneForm({"c": tuple(parse(c, scope) for c in ETA3)})
    fd = frame_decompose(eta, "c", g_coords=("z",), s_coords=("x", "y"))
    # beta_1 = dz, f_1 = 1, sigma_S = x dy
    X = np.random.default_rng(1).uniform(-1, 1, size=(100, 3))
    from contactcx.expr import values as vals

    assert np.allclose(vals(fd.f[0], X[:, :2]), 1.0)
    assert np.allclose(vals(fd.sigma[1], X[:, :2]), X[:, 0])
    assert frame_reconstruction_residual(fd, eta, X) < 1e-12


def test_frame_decompose_circle_over_point():
    # eta = d theta on G = S^1 over a 0-dimensional slice
    eta = OneForm({"c": (parse("1", ("th",)),)})
    fd = frame_decompose(eta, "c", g_coords=("th",), s_coords=())
    assert values(fd.f[0], np.zeros((1, 0)))[0] == 1.0
    assert fd.sigma == ()


def test_product_potential_heisenberg():
    scope = ("x", "y", "z")
    eta = OneForm({"c": tuple(parse(c, scope) for c in ETA3)})
    fd = frame_decompose(eta, "c", g_coords=("y",), s_coords=("x", "z"))
    theta = product_potential(fd).rescope(tube_scope(scope))
    f = ScalarField.single("c", theta)
    X = np.random.default_rng(2).uniform(-1, 1, size=(400, 3))
    eta_vals = np.stack([values(parse(c, scope), X) for c in ETA3], axis=-1)
    assert _pullback_residual(f, "c", X, eta_vals) < 1e-12


def _rotation_product_presentation():
    """G x S = T^1 x R^2 with K = S^1 rotating the slice: the compact-factor
    case where the zero-level tangency of the twisted action is non-vacuous."""
    scope = ("th", "x", "y")
    coeffs = ("x^2 + y^2", "-y", "x")  # pi_K^* eta = |s|^2 d theta + (x dy - y dx)
    eta = OneForm({"c": tuple(parse(c, scope) for c in coeffs)})
    group = GroupModel(kind="torus", k=1, params=("a",))
    b = scope + ("a",)
    t = tube_scope(scope) + ("a",)
    base_maps = {
        "c": (
            parse("th - a", b),
            parse("x*cos(a) - y*sin(a)", b),
            parse("x*sin(a) + y*cos(a)", b),
        )
    }
    tube_maps = {
        "c": (
            parse("th - a", t),
            parse("x*cos(a) - y*sin(a)", t),
            parse("x*sin(a) + y*cos(a)", t),
            parse("th_im", t),
            parse("x_im*cos(a) - y_im*sin(a)", t),
            parse("x_im*sin(a) + y_im*cos(a)", t),
        )
    }
    action = ActionModel(group=group, base_maps=base_maps, tube_maps=tube_maps)
    return scope, eta, action


def test_product_construction_zero_level_tangency():
    scope, eta, action = _rotation_product_presentation()
    fd = frame_decompose(eta, "c", g_coords=("th",), s_coords=("x", "y"))
    assert str(fd.f[0]) == "x^2 + y^2"
    X = np.random.default_rng(4).uniform(-1, 1, size=(300, 3))
    assert frame_reconstruction_residual(fd, eta, X) < 1e-12

    theta = product_potential(fd).rescope(tube_scope(scope))
    nu = convexifier_field(chart_name="c", base_coords=scope)
    rho = convexify(ScalarField.single("c", theta), nu, 1.0)
    rho = average(rho, action, 32)

    # d/dt rho(exp(i t zeta) p)|_0 = 0 along G x S for zeta in Lie(K)
    res = tangency_residual(rho, action, "c", [(1.0,)], X)
    assert res < 1e-8

    # sigma_S is K-invariant under the twisted action (theta is an angle)
    from contactcx.symmetry import invariance_residual
    from contactcx.geometry import Atlas as _A, chart as _c

    atlas = _A({"c": _c("c", list(scope), [(0.0, TWO_PI), (-4, 4), (-4, 4)], periodic=[True, False, False])})
    sig = OneForm({"c": (parse("0", scope),) + tuple(e.rescope(scope) for e in fd.sigma)})
    res_sig = invariance_residual(action, sig, {"c": X * 0.5}, atlas)
    assert res_sig < 1e-8
