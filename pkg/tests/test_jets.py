"""Jet evaluation against finite differences and hand derivatives.

The 1000-expression AD-vs-central-difference sweep doubles as the
cross-validation half of the acceptance suite (see test_acceptance).
"""

import math
import random

import numpy as np
import pytest

from contactcx.errors import DomainError
from contactcx.expr import evaluate_jet, jets, parse, serialize, values
from contactcx.expr.nodes import Add, Div, Expression, Fun, Mul, Neg, Num, Pow, Sub, Var

SCOPE = ("x", "y", "z")


def test_polynomial_jet():
    j = evaluate_jet(parse("x^2 + y^2", ["x", "y"]), {"x": 1.0, "y": 2.0})
    assert j.value == 5.0
    assert np.allclose(j.gradient, [2.0, 4.0])
    assert np.allclose(j.hessian, 2.0 * np.eye(2))


def test_product_rule():
    j = evaluate_jet(parse("x*y", ["x", "y"]), {"x": 2.0, "y": 3.0})
    assert j.value == 6.0
    assert np.allclose(j.gradient, [3.0, 2.0])
    assert j.hessian[0, 1] == 1.0 and j.hessian[1, 0] == 1.0


def test_cos_at_half_pi():
    j = evaluate_jet(parse("cos(z)", SCOPE), {"x": 0.0, "y": 0.0, "z": math.pi / 2})
    assert abs(j.value) < 1e-12
    # central finite-difference oracle, h = 1e-5
    h = 1e-5
    fd = (math.cos(math.pi / 2 + h) - math.cos(math.pi / 2 - h)) / (2 * h)
    assert abs(j.gradient[2] - fd) < 1e-6
    assert abs(j.gradient[2] + 1.0) < 1e-10


def test_hessian_built_symmetric():
    j = evaluate_jet(parse("sin(x*y) * exp(z)", SCOPE), {"x": 0.3, "y": -1.2, "z": 0.4})
    assert np.array_equal(j.hessian, j.hessian.T)  # identical floats, not just close


def test_domain_errors_name_subexpression():
    with pytest.raises(DomainError) as exc:
        evaluate_jet(parse("log(x - 2.0)", ["x"]), {"x": 1.0})
    assert "log" in str(exc.value)
    with pytest.raises(DomainError):
        evaluate_jet(parse("1.0/(x - 1.0)", ["x"]), {"x": 1.0})
    with pytest.raises(DomainError):
        evaluate_jet(parse("abs(x)", ["x"]), {"x": 0.0})


def test_value_mode_allows_abs_zero():
    assert values(parse("abs(x)", ["x"]), np.array([[0.0]]))[0] == 0.0


def test_missing_assignment():
    with pytest.raises(DomainError):
        evaluate_jet(parse("x + y", ["x", "y"]), {"x": 1.0})


def test_wrap_and_bump_values():
    e = parse("wrap(th)", ["th"])
    assert abs(values(e, np.array([[2 * math.pi + 0.25]]))[0] - 0.25) < 1e-14
    b = parse("bump(t)", ["t"])
    assert values(b, np.array([[1.0]]))[0] == 0.0
    assert values(b, np.array([[2.0]]))[0] == 0.0
    assert values(b, np.array([[0.0]]))[0] == pytest.approx(math.exp(-1.0))
    j = evaluate_jet(b, {"t": 0.999999})
    assert j.value == pytest.approx(0.0, abs=1e-300)
    assert j.gradient[0] == pytest.approx(0.0, abs=1e-290)


# ---------------------------------------------------------------------------
# randomized AD vs finite differences (relative 1e-4, h = 1e-5)

FUNCS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


def random_node(rng, depth):
    roll = rng.random()
    if depth <= 0 or roll < 0.25:
        if rng.random() < 0.6:
            return Var(rng.choice(SCOPE))
        return Num(round(rng.uniform(-2.5, 2.5), 3))
    if roll < 0.45:
        return Add(random_node(rng, depth - 1), random_node(rng, depth - 1))
    if roll < 0.6:
        return Sub(random_node(rng, depth - 1), random_node(rng, depth - 1))
    if roll < 0.75:
        return Mul(random_node(rng, depth - 1), random_node(rng, depth - 1))
    if roll < 0.83:
        return Div(random_node(rng, depth - 1), random_node(rng, depth - 1))
    if roll < 0.88:
        return Pow(random_node(rng, depth - 1), rng.randint(0, 4))
    if roll < 0.93:
        return Neg(random_node(rng, depth - 1))
    return Fun(rng.choice(FUNCS), random_node(rng, depth - 1))


def fd_jet(expr, p, h=1e-5):
    """Central-difference value/gradient/Hessian oracle."""
    n = len(p)

    def f(q):
        return values(expr, np.asarray(q, dtype=float).reshape(1, -1))[0]

    grad = np.zeros(n)
    hess = np.zeros((n, n))
    f0 = f(p)
    for i in range(n):
        up, dn = np.array(p, float), np.array(p, float)
        up[i] += h
        dn[i] -= h
        fu, fd = f(up), f(dn)
        grad[i] = (fu - fd) / (2 * h)
        hess[i, i] = (fu - 2 * f0 + fd) / (h * h)
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp, mm = (np.array(p, float) for _ in range(4))
            pp[[i, j]] += h
            mm[[i, j]] -= h
            pm[i] += h
            pm[j] -= h
            mp[i] -= h
            mp[j] += h
            hess[i, j] = hess[j, i] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h)
    return f0, grad, hess


def _acceptable(expr, p):
    """Reject singular or badly scaled draws so the FD oracle is meaningful."""
    try:
        j = evaluate_jet(expr, dict(zip(SCOPE, p)))
    except DomainError:
        return None
    pieces = [abs(j.value), float(np.max(np.abs(j.gradient))), float(np.max(np.abs(j.hessian)))]
    if not all(np.isfinite(pieces)) or max(pieces) > 40.0:
        return None
    # the FD probe must stay inside the domain as well
    try:
        fd_jet(expr, p)
    except DomainError:
        return None
    return j


def ad_fd_corpus(n_cases=1000, seed=12345):
    rng = random.Random(seed)
    produced = 0
    while produced < n_cases:
        expr = Expression(random_node(rng, 4), SCOPE)
        p = [rng.uniform(-1.5, 1.5) for _ in SCOPE]
        j = _acceptable(expr, p)
        if j is None:
            continue
        produced += 1
        yield expr, p, j


def test_ad_matches_finite_differences_1000():
    worst = 0.0
    for expr, p, j in ad_fd_corpus(1000):
        f0, g, h = fd_jet(expr, p)
        scale_g = np.maximum(1.0, np.abs(j.gradient))
        scale_h = np.maximum(1.0, np.abs(j.hessian))
        worst = max(
            worst,
            float(np.max(np.abs(j.gradient - g) / scale_g)),
            float(np.max(np.abs(j.hessian - h) / scale_h)),
        )
    assert worst < 1e-4, f"worst AD-vs-FD relative deviation {worst}"


def test_parse_serialize_parse_idempotent_on_corpus():
    rng = random.Random(99)
    for _ in range(300):
        root = random_node(rng, 4)
        text = serialize(root)
        once = parse(text, SCOPE)
        again = parse(serialize(once.root), SCOPE)
        assert once.root == again.root


def test_batch_matches_pointwise():
    expr = parse("exp(sin(x) + 0.5*y) / (2.0 + z^2)", SCOPE)
    X = np.random.default_rng(0).uniform(-1, 1, size=(37, 3))
    v, g, hp = jets(expr, X)
    for k in (0, 11, 36):
        j = evaluate_jet(expr, dict(zip(SCOPE, X[k])))
        assert v[k] == j.value
        assert np.array_equal(g[k], j.gradient)
