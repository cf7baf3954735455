"""Scenario files: a declarative JSON description of one verification setup.

Top-level keys: name, atlas, one_form, group, action, complexification,
quotient, samples, checks.  Expressions are strings in the DSL; every string
is parsed in its declared scope at load time and violations carry the JSON
path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ContactcxError, ScenarioError
from ..expr import parse
from ..complexify import tube_scope
from ..geometry import Atlas, OneForm, Transition, chart as make_chart
from ..symmetry import ActionModel, GroupModel

KNOWN_CHECKS = (
    "atlas_transitions",
    "oneform_overlap",
    "contact",
    "eta_invariance",
    "dc_consistency",
    "extension_pullback",
    "rho_vanishes",
    "spsh",
    "rho_invariance",
    "cr_levi",
    "frame_reconstruction",
    "product_pullback",
    "tangency",
    "hamiltonian",
    "moment_extension",
    "zero_level",
    "contact_reduce",
    "perturbation",
    "section_independence",
    "kahler_reduce",
    "compatibility",
    "cr_reduce",
    "kappa_rank",
    "symplectify",
    "stratify",
    "stratified_reduce",
)

_QUOTIENT_CHECKS = {
    "contact_reduce",
    "perturbation",
    "kahler_reduce",
    "compatibility",
    "cr_reduce",
    "kappa_rank",
    "zero_level",
    "section_independence",
}


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ScenarioError(f"missing required field '{key}'", path)
    return d[key]


def _parse_expr(text, scope, path):
    try:
        return parse(str(text), scope)
    except ScenarioError:
        raise
    except ContactcxError as exc:
        raise ScenarioError(f"expression error: {exc}", path) from exc


def _parse_vec(texts, scope, path):
    return tuple(_parse_expr(t, scope, f"{path}[{i}]") for i, t in enumerate(texts))


@dataclass
class Scenario:
    name: str
    raw: dict
    atlas: Atlas
    eta: OneForm
    group: GroupModel = None
    action: ActionModel = None
    complexification: dict = field(default_factory=dict)
    quotient: dict = None
    samples: dict = field(default_factory=dict)
    checks: tuple = ()
    flags: dict = field(default_factory=dict)

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.raw, indent=indent)

    def check_ids(self):
        return [c["id"] for c in self.checks]

    def tolerance(self, check_id: str, default: float) -> float:
        for c in self.checks:
            if c["id"] == check_id and "tolerance" in c:
                return float(c["tolerance"])
        return default


def load(path) -> Scenario:
    """Load and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}")
    return load_dict(raw)


def load_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a JSON object")
    name = str(_req(raw, "name", ""))

    atlas = _load_atlas(_req(raw, "atlas", name))
    eta = _load_one_form(_req(raw, "one_form", name), atlas)
    group = _load_group(raw.get("group"))
    action = _load_action(raw.get("action"), group, atlas)
    comp = _load_complexification(raw.get("complexification", {}), atlas)
    quotient = _load_quotient(raw.get("quotient"), atlas)
    samples = raw.get("samples", {})
    checks = _load_checks(raw.get("checks", []), raw)
    flags = dict(raw.get("flags", {"proper": True, "extendable": True}))
    return Scenario(
        name=name,
        raw=raw,
        atlas=atlas,
        eta=eta,
        group=group,
        action=action,
        complexification=comp,
        quotient=quotient,
        samples=samples,
        checks=checks,
        flags=flags,
    )


def _load_atlas(spec: dict) -> Atlas:
    charts = {}
    for i, ch in enumerate(_req(spec, "charts", "atlas")):
        path = f"atlas.charts[{i}]"
        name = str(_req(ch, "name", path))
        coords = [str(c) for c in _req(ch, "coords", path)]
        box = _req(ch, "box", path)
        if len(box) != len(coords):
            raise ScenarioError("box length differs from coords", f"{path}.box")
        periodic = ch.get("periodic", [False] * len(coords))
        try:
            charts[name] = make_chart(name, coords, box, periodic)
        except ValueError as exc:
            raise ScenarioError(str(exc), path)
    transitions = []
    for i, tr in enumerate(spec.get("transitions", [])):
        path = f"atlas.transitions[{i}]"
        src = str(_req(tr, "src", path))
        dst = str(_req(tr, "dst", path))
        for c in (src, dst):
            if c not in charts:
                raise ScenarioError(f"unknown chart '{c}'", path)
        src_scope = charts[src].coords
        exprs = _parse_vec(_req(tr, "exprs", path), src_scope, f"{path}.exprs")
        if len(exprs) != charts[dst].dim:
            raise ScenarioError("transition component count differs from target dim", f"{path}.exprs")
        tube_exprs = None
        if "tube_exprs" in tr:
            tube_exprs = _parse_vec(tr["tube_exprs"], tube_scope(src_scope), f"{path}.tube_exprs")
            if len(tube_exprs) != 2 * charts[dst].dim:
                raise ScenarioError("tube extension needs doubled components", f"{path}.tube_exprs")
        dom = tr.get("domain", {})
        exclusions = tuple(
            (tuple(float(x) for x in b["center"]), float(b["radius"])) for b in dom.get("exclude_balls", [])
        )
        transitions.append(
            Transition(
                name=str(tr.get("name", f"{src}->{dst}")),
                src=src,
                dst=dst,
                exprs=exprs,
                inverse=str(_req(tr, "inverse", path)),
                domain_box=tuple(tuple(float(x) for x in b) for b in dom["box"]) if "box" in dom else None,
                exclusions=exclusions,
                tube_exprs=tube_exprs,
            )
        )
    names = {t.name for t in transitions}
    for t in transitions:
        if t.inverse not in names:
            raise ScenarioError(f"transition '{t.name}' declares unknown inverse '{t.inverse}'", "atlas.transitions")
    return Atlas(charts, tuple(transitions))


def _load_one_form(spec: dict, atlas: Atlas) -> OneForm:
    coeffs = {}
    for name, ch in atlas.charts.items():
        if name not in spec:
            raise ScenarioError(f"one_form misses chart '{name}'", "one_form")
        vec = spec[name]
        if len(vec) != ch.dim:
            raise ScenarioError(f"needs {ch.dim} coefficients", f"one_form.{name}")
        coeffs[name] = _parse_vec(vec, ch.coords, f"one_form.{name}")
    return OneForm(coeffs)


def _load_group(spec) -> GroupModel:
    if spec is None:
        return None
    kind = str(_req(spec, "kind", "group"))
    if kind == "finite":
        elements = tuple(str(e) for e in _req(spec, "elements", "group"))
        table_raw = _req(spec, "table", "group")
        table = {}
        for a, row in table_raw.items():
            for b, prod in row.items():
                table[(str(a), str(b))] = str(prod)
        return GroupModel(kind=kind, k=0, params=(), elements=elements, table=table)
    k = int(spec.get("k", 1))
    params = tuple(str(p) for p in spec.get("params", [f"a{i+1}" for i in range(k)] if k > 1 else ["a"]))
    return GroupModel(kind=kind, k=k, params=params)


def _load_action(spec, group: GroupModel, atlas: Atlas) -> ActionModel:
    if spec is None:
        if group is not None:
            raise ScenarioError("group declared without an action", "action")
        return None
    if group is None:
        raise ScenarioError("action declared without a group", "action")
    if group.is_finite:
        base, tube = {}, {}
        maps = _req(spec, "maps", "action")
        tube_maps = spec.get("tube_maps", {})
        for g in group.elements:
            if g not in maps:
                raise ScenarioError(f"missing maps for element '{g}'", "action.maps")
            base[g] = {}
            for name, ch in atlas.charts.items():
                vec = _req(maps[g], name, f"action.maps.{g}")
                base[g][name] = _parse_vec(vec, ch.coords, f"action.maps.{g}.{name}")
            if g in tube_maps:
                tube[g] = {}
                for name, ch in atlas.charts.items():
                    vec = _req(tube_maps[g], name, f"action.tube_maps.{g}")
                    tube[g][name] = _parse_vec(vec, tube_scope(ch.coords), f"action.tube_maps.{g}.{name}")
        return ActionModel(group=group, base_maps=base, tube_maps=tube if tube else None)
    base, tube = {}, {}
    maps = _req(spec, "maps", "action")
    for name, ch in atlas.charts.items():
        vec = _req(maps, name, "action.maps")
        scope = ch.coords + group.params
        base[name] = _parse_vec(vec, scope, f"action.maps.{name}")
    tube_maps = spec.get("tube_maps")
    if tube_maps is not None:
        for name, ch in atlas.charts.items():
            vec = _req(tube_maps, name, "action.tube_maps")
            scope = tube_scope(ch.coords) + group.params
            tube[name] = _parse_vec(vec, scope, f"action.tube_maps.{name}")
    return ActionModel(group=group, base_maps=base, tube_maps=tube if tube else None)


def _load_complexification(spec: dict, atlas: Atlas) -> dict:
    out = {
        "radius": float(spec.get("radius", 0.5)),
        "lambda": float(spec.get("lambda", 1.0)),
        "quadrature_n": int(spec.get("quadrature_n", 64)),
        "construction": str(spec.get("construction", "local")),
        "average": bool(spec.get("average", False)),
    }
    if out["radius"] <= 0:
        raise ScenarioError("radius must be positive", "complexification.radius")
    if out["lambda"] < 0:
        raise ScenarioError("lambda must be non-negative", "complexification.lambda")
    if out["construction"] not in ("local", "patched", "frame"):
        raise ScenarioError("construction must be local|patched|frame", "complexification.construction")
    if out["construction"] == "patched":
        part = _req(spec, "partition", "complexification")
        bumps = []
        for i, b in enumerate(part.get("bumps", [])):
            path = f"complexification.partition.bumps[{i}]"
            cname = str(_req(b, "chart", path))
            if cname not in atlas.charts:
                raise ScenarioError(f"unknown chart '{cname}'", path)
            bumps.append(
                dict(
                    chart=cname,
                    center=tuple(float(x) for x in _req(b, "center", path)),
                    halfwidth=tuple(float(x) for x in _req(b, "halfwidth", path)),
                    shape=str(b.get("shape", "box")),
                )
            )
        if not bumps:
            raise ScenarioError("patched construction needs bumps", "complexification.partition")
        out["partition"] = {
            "bumps": bumps,
            "vanishing_box": {
                k: tuple(tuple(float(x) for x in pair) for pair in v)
                for k, v in part.get("vanishing_box", {}).items()
            },
        }
    if out["construction"] == "frame":
        fr = _req(spec, "frame", "complexification")
        out["frame"] = {
            "chart": str(_req(fr, "chart", "complexification.frame")),
            "g_coords": tuple(str(c) for c in _req(fr, "g_coords", "complexification.frame")),
            "s_coords": tuple(str(c) for c in _req(fr, "s_coords", "complexification.frame")),
            "compact_generators": [tuple(float(x) for x in g) for g in fr.get("compact_generators", [])],
        }
    if "symplectify" in spec:
        sy = spec["symplectify"]
        out["symplectify"] = {
            "t_name": str(sy.get("t_name", "t")),
            "t_box": tuple(float(x) for x in sy.get("t_box", (-1.0, 1.0))),
            "lambda": float(sy.get("lambda", 1.0)),
        }
    return out


def _load_quotient(spec, atlas: Atlas) -> dict:
    if spec is None:
        return None
    out = {}
    if "contact" in spec:
        out["contact"] = _load_quotient_block(spec["contact"], "quotient.contact")
    if "kahler" in spec:
        out["kahler"] = _load_quotient_block(spec["kahler"], "quotient.kahler")
        if "contact_embed" not in spec["kahler"]:
            raise ScenarioError("missing required field 'contact_embed'", "quotient.kahler")
    if "strata" in spec:
        out["strata"] = spec["strata"]
    if "stratify" in spec:
        out["stratify"] = spec["stratify"]
    if "level_empty" in spec:
        out["level_empty"] = bool(spec["level_empty"])
    return out


def _load_quotient_block(spec: dict, path: str) -> dict:
    out = dict(spec)
    _req(spec, "chart", path)
    for key in ("level", "section", "projection", "base_chart"):
        if key not in spec:
            raise ScenarioError(f"missing required field '{key}'", path)
    return out


def _load_checks(entries, raw) -> tuple:
    checks = []
    for i, c in enumerate(entries):
        path = f"checks[{i}]"
        if isinstance(c, str):
            c = {"id": c}
        cid = str(_req(c, "id", path))
        if cid not in KNOWN_CHECKS:
            raise ScenarioError(f"unknown check id '{cid}'", path)
        if cid in _QUOTIENT_CHECKS:
            q = raw.get("quotient") or {}
            needs = "kahler" if cid in ("kahler_reduce", "compatibility", "cr_reduce", "kappa_rank") else "contact"
            if cid == "zero_level":
                if "level_empty" not in q and "contact" not in q:
                    raise ScenarioError(f"quotient.contact required by check {cid}", path)
            elif needs not in q:
                raise ScenarioError(f"quotient.{needs}.section required by check {cid}", path)
        entry = {"id": cid}
        if "tolerance" in c:
            entry["tolerance"] = float(c["tolerance"])
        checks.append(entry)
    return tuple(checks)
