import math

import numpy as np
import pytest

from contactcx.errors import ChartDomainError, ScenarioError, UnsupportedStructureError
from contactcx.expr import parse, values
from contactcx.fields import ScalarField
from contactcx.geometry import Atlas, OneForm, chart
from contactcx.sampling import inclusive_lattice, lattice
from contactcx.symmetry import (
    ActionModel,
    GroupModel,
    action_consistency_residual,
    conjugacy_label,
    generator_at,
    invariance_residual,
    isotropy,
    stratify,
)

SCOPE = ("x", "y", "z")
R3 = chart("c", ["x", "y", "z"], [(-1, 1)] * 3)
ATLAS = Atlas({"c": R3})


def _translation_action(axis="y"):
    group = GroupModel(kind="translation", k=1, params=("a",))
    b = SCOPE + ("a",)
    comps = tuple(parse(f"{c} + a" if c == axis else c, b) for c in SCOPE)
    return ActionModel(group=group, base_maps={"c": comps})


def _z2_action():
    group = GroupModel(
        kind="finite",
        elements=("e", "s"),
        table={("e", "e"): "e", ("e", "s"): "s", ("s", "e"): "s", ("s", "s"): "e"},
    )
    base = {
        "e": {"c": tuple(parse(c, SCOPE) for c in ("x", "y", "z"))},
        "s": {"c": tuple(parse(c, SCOPE) for c in ("-x", "-y", "z"))},
    }
    return ActionModel(group=group, base_maps=base)


def _rotation_action():
    group = GroupModel(kind="circle_matrix", k=1, params=("a",))
    b = SCOPE + ("a",)
    comps = (parse("x*cos(a) - y*sin(a)", b), parse("x*sin(a) + y*cos(a)", b), parse("z", b))
    return ActionModel(group=group, base_maps={"c": comps})


def test_group_table_validation():
    with pytest.raises(ScenarioError):
        GroupModel(kind="finite", elements=("e", "s"), table={("e", "e"): "e"})
    with pytest.raises(ScenarioError):
        GroupModel(kind="nope")


def test_generator_translation():
    action = _translation_action("y")
    X = np.random.default_rng(0).uniform(-1, 1, size=(20, 3))
    V = generator_at(action, "c", (1.0,), X)
    assert np.allclose(V, [0.0, 1.0, 0.0])


def test_generator_rotation():
    action = _rotation_action()
    X = np.random.default_rng(1).uniform(-1, 1, size=(20, 3))
    V = generator_at(action, "c", (1.0,), X)
    assert np.allclose(V[:, 0], -X[:, 1], atol=1e-14)
    assert np.allclose(V[:, 1], X[:, 0], atol=1e-14)
    assert np.allclose(V[:, 2], 0.0)


def test_generator_torus_axis():
    group = GroupModel(kind="torus", k=2, params=("a1", "a2"))
    t3 = chart("t", ["x", "y", "z"], [(0, 2 * math.pi)] * 3, periodic=[True] * 3)
    b = t3.coords + ("a1", "a2")
    action = ActionModel(
        group=group,
        base_maps={"t": (parse("x + a1", b), parse("y + a2", b), parse("z", b))},
    )
    X = np.zeros((5, 3))
    assert np.allclose(generator_at(action, "t", (1.0, 0.0), X), [1, 0, 0])
    assert np.allclose(generator_at(action, "t", (0.0, 1.0), X), [0, 1, 0])


def test_finite_group_has_no_generators():
    with pytest.raises(UnsupportedStructureError):
        _z2_action().generator_exprs("c", (1.0,))


def test_invariance_residual_invariant_form():
    eta = OneForm({"c": tuple(parse(c, SCOPE) for c in ("0", "x", "1"))})
    X = lattice(R3, 6, jitter=0.01, seed=2, margin=0.5)
    assert invariance_residual(_translation_action("y"), eta, {"c": X}, ATLAS) < 1e-12


def test_invariance_residual_detects_noninvariance():
    # eta = cos z dx + sin z dy under z-translation
    t3 = chart("t", ["x", "y", "z"], [(0, 2 * math.pi)] * 3, periodic=[True] * 3)
    atlas = Atlas({"t": t3})
    group = GroupModel(kind="torus", k=1, params=("a",))
    b = t3.coords + ("a",)
    action = ActionModel(group=group, base_maps={"t": (parse("x", b), parse("y", b), parse("z + a", b))})
    eta = OneForm({"t": tuple(parse(c, t3.coords) for c in ("cos(z)", "sin(z)", "0"))})
    X = lattice(t3, 5, jitter=0.0, seed=3)
    res = invariance_residual(action, eta, {"t": X}, atlas)
    assert res > 0.1


def test_invariance_trivial_group_is_zero():
    action = _z2_action()
    f = ScalarField.single("c", parse("x^2 + z", SCOPE))
    X = lattice(R3, 5, jitter=0.0, seed=1, margin=0.1)
    res = invariance_residual(action, f, {"c": X}, ATLAS, elements=["e"])
    assert res == 0.0


def test_moved_point_off_chart_reports_pair():
    action = _translation_action("y")
    X = np.array([[0.0, 0.9, 0.0]])
    f = ScalarField.single("c", parse("y", SCOPE))
    with pytest.raises(ChartDomainError) as exc:
        invariance_residual(action, f, {"c": X}, ATLAS, elements=[(0.4,)])
    assert "0.4" in str(exc.value)


def test_action_consistency():
    X = lattice(R3, 4, jitter=0.0, seed=1, margin=0.55)
    assert action_consistency_residual(_translation_action("y"), {"c": X}, ATLAS) < 1e-12


def test_isotropy_finite():
    action = _z2_action()
    assert isotropy(action, "c", np.array([0.0, 0.0, 0.5])) == frozenset({"e", "s"})
    assert isotropy(action, "c", np.array([1.0, 0.0, 0.0])) == frozenset({"e"})


def test_isotropy_continuous():
    action = _rotation_action()
    assert isotropy(action, "c", np.array([0.0, 0.0, 0.7])) == "full"
    assert isotropy(action, "c", np.array([0.3, 0.0, 0.0])) == "trivial"


def test_stratify_z2_grid():
    action = _z2_action()
    X = inclusive_lattice(R3, 21)
    strat = stratify(action, {"c": X})
    full_label = conjugacy_label(action.group, frozenset({"e", "s"}))
    axis = np.all(X[:, :2] == 0.0, axis=1)
    assert len(strat.labels) == 2
    got_axis = np.zeros(X.shape[0], dtype=bool)
    got_axis[strat.labels[full_label]["c"]] = True
    assert np.array_equal(got_axis, axis)
    assert axis.sum() == 21  # the z-axis line of the 21^3 grid


def test_stratify_rotation_axis():
    action = _rotation_action()
    X = inclusive_lattice(R3, 9)
    strat = stratify(action, {"c": X})
    axis = np.all(X[:, :2] == 0.0, axis=1)
    got_axis = np.zeros(X.shape[0], dtype=bool)
    got_axis[strat.labels["full"]["c"]] = True
    assert np.array_equal(got_axis, axis)


def test_stabilizer_conjugation_equivariance():
    """isotropy(g p) = g isotropy(p) g^-1 for a nonabelian S3 permutation action."""
    elements = ("e", "r", "rr", "s", "rs", "rrs")

    def mul(a, b):
        # S3 with r = (123), s = (12): compose as permutations of (0, 1, 2)
        perms = {
            "e": (0, 1, 2),
            "r": (1, 2, 0),
            "rr": (2, 0, 1),
            "s": (1, 0, 2),
            "rs": (0, 2, 1),
            "rrs": (2, 1, 0),
        }
        pa, pb = perms[a], perms[b]
        comp = tuple(pa[pb[i]] for i in range(3))
        return {v: k for k, v in perms.items()}[comp]

    table = {(a, b): mul(a, b) for a in elements for b in elements}
    group = GroupModel(kind="finite", elements=elements, table=table)
    perms = {
        "e": (0, 1, 2),
        "r": (1, 2, 0),
        "rr": (2, 0, 1),
        "s": (1, 0, 2),
        "rs": (0, 2, 1),
        "rrs": (2, 1, 0),
    }
    names = ("x", "y", "z")
    base = {
        g: {"c": tuple(parse(names[p.index(i)], SCOPE) for i in range(3))}
        for g, p in perms.items()
    }
    action = ActionModel(group=group, base_maps=base)
    rng = np.random.default_rng(7)
    for p in [np.array([0.3, 0.3, -0.5]), np.array([0.2, 0.2, 0.2]), rng.uniform(-1, 1, 3)]:
        H = isotropy(action, "c", p)
        for g in elements:
            q = action.apply("c", p[None, :], g)[0]
            Hq = isotropy(action, "c", q)
            gi = group.inverse(g)
            conj = frozenset(group.table[(group.table[(g, h)], gi)] for h in H)
            assert Hq == conj


def test_invariant_function_annihilated_by_generators():
    action = _rotation_action()
    f = parse("x^2 + y^2 + z", SCOPE)
    X = np.random.default_rng(5).uniform(-1, 1, size=(50, 3))
    from contactcx.expr import gradients

    _, g = gradients(f, X)
    V = generator_at(action, "c", (1.0,), X)
    assert np.max(np.abs(np.sum(g * V, axis=1))) < 1e-13
