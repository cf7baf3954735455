"""Group models, actions on atlases and tubes, invariance and stratification.

Supported group kinds: finite (multiplication table), torus T^k, translation
R^k, and the matrix circle (S^1 by rotation matrices).  Properness and
extendability are scenario metadata and never verified here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError, ScenarioError, UnsupportedStructureError
from .expr import Expression, const

from .fields import ScalarField
from .geometry import Atlas, OneForm, eval_vector, jacobian

FINITE = "finite"
TORUS = "torus"
TRANSLATION = "translation"
CIRCLE_MATRIX = "circle_matrix"

# deterministic group sampling (see spec'd sampling policy in README)
_TORUS_SAMPLES = 16
_TRANSLATION_MAGNITUDES = (-0.3, -0.15, 0.15, 0.3, -0.45, 0.45, -0.075, 0.075)


@dataclass(frozen=True)
class GroupModel:
    kind: str
    k: int = 0  # Lie-algebra dimension (0 for finite groups)
    params: tuple = ()
    elements: tuple = ()
    table: dict = None  # finite: (a, b) -> product name

    def __post_init__(self):
        if self.kind == FINITE:
            if not self.elements or self.table is None:
                raise ScenarioError("finite group needs elements and a multiplication table", "group")
            for a in self.elements:
                for b in self.elements:
                    if (a, b) not in self.table:
                        raise ScenarioError(f"multiplication table misses ({a}, {b})", "group.table")
                    if self.table[(a, b)] not in self.elements:
                        raise ScenarioError("multiplication table not closed", "group.table")
            if "e" not in self.elements:
                raise ScenarioError("finite group needs an identity element named 'e'", "group")
            for a in self.elements:
                if self.table[("e", a)] != a or self.table[(a, "e")] != a:
                    raise ScenarioError("'e' is not an identity in the table", "group.table")
        elif self.kind in (TORUS, TRANSLATION, CIRCLE_MATRIX):
            if self.k < 1 or len(self.params) != self.k:
                raise ScenarioError("continuous group needs k >= 1 named parameters", "group")
        else:
            raise ScenarioError(f"unknown group kind '{self.kind}'", "group.kind")

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    @property
    def is_compact(self) -> bool:
        return self.kind in (FINITE, TORUS, CIRCLE_MATRIX)

    def inverse(self, a: str) -> str:
        for b in self.elements:
            if self.table[(a, b)] == "e":
                return b
        raise ScenarioError(f"element '{a}' has no inverse in the table", "group.table")

    def conjugacy_class_of_subgroup(self, H: frozenset) -> frozenset:
        """Set of conjugates g H g^-1 (finite groups)."""
        out = set()
        for g in self.elements:
            gi = self.inverse(g)
            out.add(frozenset(self.table[(self.table[(g, h)], gi)] for h in H))
        return frozenset(out)

    def sample_elements(self, scale: float = 1.0):
        """Deterministic element sample used by invariance checks.

        Finite groups are exhaustive; tori and the matrix circle use 16 roots
        of unity per axis; translations use 8 fixed magnitudes per axis.
        """
        if self.is_finite:
            return list(self.elements)
        out = []
        if self.kind in (TORUS, CIRCLE_MATRIX):
            angles = [2.0 * math.pi * i / _TORUS_SAMPLES for i in range(1, _TORUS_SAMPLES)]
            for axis in range(self.k):
                for a in angles:
                    vec = [0.0] * self.k
                    vec[axis] = a
                    out.append(tuple(vec))
        else:
            for axis in range(self.k):
                for mag in _TRANSLATION_MAGNITUDES:
                    vec = [0.0] * self.k
                    vec[axis] = mag * scale
                    out.append(tuple(vec))
        return out

    def identity(self):
        return "e" if self.is_finite else (0.0,) * self.k

    def compose(self, a, b):
        if self.is_finite:
            return self.table[(a, b)]
        out = tuple(x + y for x, y in zip(a, b))
        if self.kind in (TORUS, CIRCLE_MATRIX):
            out = tuple(x % (2.0 * math.pi) for x in out)
        return out


@dataclass(frozen=True)
class ActionModel:
    """Per-chart action maps as Expression vectors.

    Continuous groups: one map per chart over (chart coords + group params);
    finite groups: one map per (element, chart) over chart coords.  Tube maps
    are the declared holomorphic extensions over doubled coordinates.
    """

    group: GroupModel
    base_maps: dict
    tube_maps: dict = None

    def _lookup(self, maps, chart_name, g):
        if self.group.is_finite:
            return maps[g][chart_name], {}
        exprs = maps[chart_name]
        subs = {p: const(float(v), exprs[0].scope) for p, v in zip(self.group.params, g)}
        return exprs, subs

    def map_exprs(self, chart_name: str, g, tube: bool = False):
        """Concrete Expression vector for one group element (params substituted)."""
        maps = self.tube_maps if tube else self.base_maps
        if maps is None:
            raise ScenarioError("action lacks a declared tube extension", "action.tube_maps")
        exprs, subs = self._lookup(maps, chart_name, g)
        if not subs:
            return exprs
        coords = [c for c in exprs[0].scope if c not in self.group.params]
        return tuple(e.subst(subs, scope=tuple(coords)) for e in exprs)

    def apply(self, chart_name: str, X: np.ndarray, g, tube: bool = False) -> np.ndarray:
        return eval_vector(self.map_exprs(chart_name, g, tube=tube), X)

    def generator_exprs(self, chart_name: str, xi, tube: bool = False) -> tuple:
        """xi_M components: d/dt psi_{exp(t xi)} |_{t=0}, exact via symbolic d/d param."""
        if self.group.is_finite:
            raise UnsupportedStructureError("finite groups have no Lie algebra")
        maps = self.tube_maps if tube else self.base_maps
        if maps is None:
            raise ScenarioError("action lacks a declared tube extension", "action.tube_maps")
        exprs = maps[chart_name]
        coords = tuple(c for c in exprs[0].scope if c not in self.group.params)
        zero = {p: const(0.0, exprs[0].scope) for p in self.group.params}
        out = []
        for comp in exprs:
            acc = const(0.0, coords)
            for w, p in zip(xi, self.group.params):
                if w != 0.0:
                    acc = acc + float(w) * comp.diff(p).subst(zero, scope=coords)
            out.append(acc)
        return tuple(out)

    def lie_basis(self):
        return [tuple(1.0 if i == j else 0.0 for j in range(self.group.k)) for i in range(self.group.k)]


def generator_at(action: ActionModel, chart_name: str, xi, X: np.ndarray, tube: bool = False) -> np.ndarray:
    """xi_M(p) as vectors at sample points."""
    return eval_vector(action.generator_exprs(chart_name, xi, tube=tube), X)


def _moved_or_raise(atlas: Atlas, chart_name: str, X, Y, g):
    ch = atlas.chart(chart_name)
    ok = np.asarray(ch.contains(Y))
    if not np.all(ok):
        p = X[~ok][0]
        raise ChartDomainError(
            f"moved point left chart '{chart_name}': group element {g!r} at point {p}"
        )
    return ch.reduce(Y)


def invariance_residual(action: ActionModel, obj, samples: dict, atlas: Atlas, tube: bool = False, elements=None) -> float:
    """max over samples and group elements of |psi_g^* obj - obj|.

    obj: ScalarField (functions) or OneForm (coefficient-wise comparison).
    """
    elems = elements if elements is not None else action.group.sample_elements()
    worst = 0.0
    for chart_name, X in samples.items():
        if X.shape[0] == 0:
            continue
        for g in elems:
            exprs = action.map_exprs(chart_name, g, tube=tube)
            if isinstance(obj, ScalarField):
                Y = eval_vector(exprs, X)
                Y = _moved_or_raise(atlas, chart_name, X, Y, g)
                moved = obj.values(chart_name, Y)
                here = obj.values(chart_name, X)
                worst = max(worst, float(np.max(np.abs(moved - here))))
            elif isinstance(obj, OneForm):
                Y, DF = jacobian(exprs, X)
                Y = _moved_or_raise(atlas, chart_name, X, Y, g)
                a_moved = obj.at(chart_name, Y)
                pulled = np.einsum("bmn,bm->bn", DF, a_moved)
                here = obj.at(chart_name, X)
                worst = max(worst, float(np.max(np.abs(pulled - here))))
            else:
                raise TypeError("invariance_residual expects a ScalarField or OneForm")
    return worst


def action_consistency_residual(action: ActionModel, samples: dict, atlas: Atlas, tube: bool = False) -> float:
    """|psi_e - id| and |psi_g o psi_h - psi_{gh}| at sampled pairs."""
    worst = 0.0
    elems = action.group.sample_elements()
    pairs = [(elems[i], elems[(i * 5 + 3) % len(elems)]) for i in range(min(6, len(elems)))]
    e = action.group.identity()
    for chart_name, X in samples.items():
        if X.shape[0] == 0:
            continue
        Y = action.apply(chart_name, X, e, tube=tube)
        ch = atlas.chart(chart_name)
        d = ch.reduce(Y) - ch.reduce(X)
        worst = max(worst, float(np.max(np.abs(d))) if d.size else 0.0)
        for g, h in pairs:
            gh = action.group.compose(g, h)
            Yh = _moved_or_raise(atlas, chart_name, X, action.apply(chart_name, X, h, tube=tube), h)
            two = action.apply(chart_name, Yh, g, tube=tube)
            one = action.apply(chart_name, X, gh, tube=tube)
            diff = ch.reduce(two) - ch.reduce(one)
            for i, per in enumerate(ch.periodic):
                if per:
                    diff[:, i] = (diff[:, i] + math.pi) % (2.0 * math.pi) - math.pi
            worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def isotropy(action: ActionModel, chart_name: str, p: np.ndarray, tol: float = 1e-8):
    """Stabilizer of a point.

    Finite groups: the exact stabilizer subset.  Continuous groups: 'full' iff
    every basis generator vanishes at p, else 'trivial'; an intermediate
    pattern (some but not all vanish) is unsupported and raises.
    """
    if action.group.is_finite:
        stab = []
        for g in action.group.elements:
            q = action.apply(chart_name, p[None, :], g)[0]
            if float(np.max(np.abs(q - p))) <= tol:
                stab.append(g)
        return frozenset(stab)
    small = []
    for xi in action.lie_basis():
        v = generator_at(action, chart_name, xi, p[None, :])[0]
        small.append(float(np.linalg.norm(v)) < tol)
    if all(small):
        return "full"
    if any(small):
        raise UnsupportedStructureError("intermediate continuous isotropy detected")
    return "trivial"


@dataclass
class Stratification:
    """Sample partition by conjugacy class of the stabilizer."""

    labels: dict  # label -> {chart -> index array}
    label_of: dict  # chart -> list of labels per sample


def conjugacy_label(group: GroupModel, H: frozenset):
    cls = group.conjugacy_class_of_subgroup(H)
    return tuple(sorted(tuple(sorted(s)) for s in cls))


def stratify(action: ActionModel, samples: dict, tol: float = 1e-8) -> Stratification:
    labels: dict = {}
    label_of: dict = {}
    group = action.group
    for chart_name, X in samples.items():
        if group.is_finite:
            member = np.stack(
                [np.max(np.abs(action.apply(chart_name, X, g) - X), axis=1) <= tol for g in group.elements]
            )  # (n_elements, B)
            cols: dict = {}
            per_point = []
            for b in range(X.shape[0]):
                key = member[:, b].tobytes()
                lab = cols.get(key)
                if lab is None:
                    H = frozenset(g for g, bit in zip(group.elements, member[:, b]) if bit)
                    lab = conjugacy_label(group, H)
                    cols[key] = lab
                per_point.append(lab)
        else:
            all_vanish = np.ones(X.shape[0], dtype=bool)
            any_vanish = np.zeros(X.shape[0], dtype=bool)
            for xi in action.lie_basis():
                V = generator_at(action, chart_name, xi, X)
                vanish = np.linalg.norm(V, axis=1) < tol
                all_vanish &= vanish
                any_vanish |= vanish
            if np.any(any_vanish & ~all_vanish):
                raise UnsupportedStructureError("intermediate continuous isotropy detected")
            per_point = ["full" if s else "trivial" for s in all_vanish]
        label_of[chart_name] = per_point
        for b, label in enumerate(per_point):
            labels.setdefault(label, {}).setdefault(chart_name, []).append(b)
    labels = {
        lab: {ch: np.asarray(ix, dtype=np.intp) for ch, ix in per.items()} for lab, per in labels.items()
    }
    return Stratification(labels=labels, label_of=label_of)
