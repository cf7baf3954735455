import numpy as np
import pytest

from contactcx.expr import parse
from contactcx.expr.tape import MODE_GRAD, MODE_VAL
from contactcx.fields import Guard, ScalarField, Term


SC = ("x", "y")


def _e(text):
    return parse(text, SC)


def test_single_term_evaluate():
    f = ScalarField.single("c", _e("x^2 + y"))
    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    v, g, h = f.evaluate("c", X)
    assert np.allclose(v, [3.0, -0.75])
    assert np.allclose(g, [[2.0, 1.0], [1.0, 1.0]])


def test_sum_of_terms():
    f = ScalarField({"c": (Term(_e("x")), Term(_e("y")))})
    X = np.array([[1.0, 2.0]])
    assert f.values("c", X)[0] == 3.0
    assert str(f.expr_on("c")) == "x + y"


def test_guard_inside_box():
    g = Guard((_e("x"),), ((0.0, 1.0),))
    X = np.array([[0.5, 0.0], [1.5, 0.0], [-0.1, 0.0]])
    assert g.mask(X).tolist() == [True, False, False]


def test_guard_outside_box():
    g = Guard((_e("x"),), ((0.0, 1.0),), outside=True)
    X = np.array([[0.5, 0.0], [1.5, 0.0]])
    assert g.mask(X).tolist() == [False, True]


def test_guard_singular_map_counts_as_outside():
    g = Guard((_e("1.0/x"),), ((-10.0, 10.0),))
    X = np.array([[0.0, 0.0], [0.5, 0.0]])
    assert g.mask(X).tolist() == [False, True]


def test_guarded_term_contributes_zero_outside():
    # 1/x is singular at 0 but guarded to its support x >= 0.5
    term = Term(_e("1.0/x"), (Guard((_e("x"),), ((0.5, 10.0),)),))
    f = ScalarField({"c": (term,)})
    X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    v = f.values("c", X)
    assert v[0] == 0.0
    assert v[1] == 1.0
    assert v[2] == 0.5


def test_compose_applies_to_exprs_and_guards():
    term = Term(_e("x^2"), (Guard((_e("x"),), ((0.0, 4.0),)),))
    f = ScalarField({"c": (term,)})
    table = {"x": _e("x + 1.0"), "y": _e("y")}
    g = f.compose({"c": table})
    X = np.array([[1.0, 0.0], [-2.0, 0.0]])
    v = g.values("c", X)
    assert v[0] == 4.0  # (x+1)^2 at x=1
    assert v[1] == 0.0  # guard moved with the composition: x+1 = -1 outside


def test_pullback_through_section():
    f = ScalarField.single("c", _e("x*y"))
    table = {"x": parse("s", ("s",)), "y": parse("s^2", ("s",))}
    red = f.pullback_through("c", table, "r", ("s",))
    S = np.array([[2.0]])
    assert red.values("r", S)[0] == 8.0


def test_scale_and_add():
    f = ScalarField.single("c", _e("x"))
    g = ScalarField.single("c", _e("y"))
    h = f.scale(2.0) + g
    X = np.array([[1.0, 3.0]])
    assert h.values("c", X)[0] == 5.0


def test_expr_on_refuses_guarded():
    term = Term(_e("x"), (Guard((_e("x"),), ((0.0, 1.0),)),))
    f = ScalarField({"c": (term,)})
    with pytest.raises(ValueError):
        f.expr_on("c")


def test_grad_accumulation_respects_masks():
    inside = Term(_e("x^2"), (Guard((_e("x"),), ((0.0, 10.0),)),))
    everywhere = Term(_e("y^2"))
    f = ScalarField({"c": (inside, everywhere)})
    X = np.array([[2.0, 1.0], [-2.0, 1.0]])
    v, g, _ = f.evaluate("c", X, MODE_GRAD)
    assert np.allclose(v, [5.0, 1.0])
    assert np.allclose(g[0], [4.0, 2.0])
    assert np.allclose(g[1], [0.0, 2.0])
