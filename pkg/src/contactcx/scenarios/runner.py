"""Scenario execution: potential construction, check registry, dependency DAG.

Checks run in dependency order (extension -> invariance -> spsh -> CR ->
moment -> reduction -> compatibility -> stratified); a failed prerequisite
short-circuits its dependents with status "skipped".  Independent checks may
run concurrently; every residual is a pure function of (scenario, seed), so
reports are deterministic regardless of the worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..errors import ContactcxError, ScenarioError
from ..expr import Expression, parse, values
from ..expr.tape import MODE_GRAD, MODE_HESS, unpack_hessian
from ..complexify import (
    TubeComplexification,
    complexify,
    cr_hypersurface,
    dc_consistency_residual,
    dc_from_gradient,
    ddc_from_hessian,
    holomorphy_residual,
    imag_name,
    j_matrix,
    spsh_check,
    tube_scope,
)
from ..fields import ScalarField
from ..geometry import (
    Atlas,
    Chart,
    OneForm,
    chart as make_chart,
    contact_check,
    eval_vector,
    jacobian,
    oneform_overlap_residual,
    pullback_symbolic,
    transition_roundtrip_residual,
    wedge_top,
)
from ..moment import (
    contact_moment_expr,
    kahler_moment,
    hamiltonian_residual,
    moment_extension_residual,
    tangency_residual,
)
from ..potential import (
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
from ..reduction import (
    Quotient,
    compatibility_check,
    contact_reduce,
    cr_reduce,
    kahler_reduce,
    kappa_rank_check,
    perturbation_certificate,
    quotient_consistency,
    section_independence_residual,
    symplectify,
    symplectify_identities,
)
from ..report import CheckRecord, VerificationReport
from ..sampling import inclusive_lattice, lattice, scale_resolution
from ..symmetry import (
    action_consistency_residual,
    generator_at,
    invariance_residual,
    stratify as stratify_samples,
)
from .schema import Scenario

LAMBDA_CAP = 64.0
RADIUS_HALVINGS = 3


@dataclass
class RunContext:
    scenario: Scenario
    seed: int
    scale: float
    tube: TubeComplexification = None
    rho: ScalarField = None
    nu: ScalarField = None
    lam_used: float = None
    radius_used: float = None
    frame: object = None
    theta_pre: Expression = None  # frame path: Theta + theta_S before convexifying
    construction_error: str = ""
    cache: dict = field(default_factory=dict)

    # ---- sampling helpers (all deterministic in (scenario, seed, scale)) ----

    def _res(self, res, keep_odd=False):
        return scale_resolution(res, self.scale, keep_odd=keep_odd)

    @property
    def jitter(self) -> float:
        return float(self.scenario.samples.get("jitter", 0.01))

    def base_samples(self, key="base_grid", margin=0.0, jitter=None):
        out = {}
        spec = self.scenario.samples.get(key) or self.scenario.samples.get("base_grid")
        for name, res in spec.items():
            ch = self.scenario.atlas.chart(name)
            out[name] = lattice(
                ch,
                self._res(res),
                jitter=self.jitter if jitter is None else jitter,
                seed=self.seed,
                margin=margin,
            )
        return out

    def tube_samples(self, key="tube_grid", margin=0.15, jitter=None):
        out = {}
        spec = self.scenario.samples.get(key) or self.scenario.samples.get("tube_grid")
        for name, res in spec.items():
            ch = self.tube.tube.chart(name)
            out[name] = lattice(
                ch,
                self._res(res),
                jitter=self.jitter if jitter is None else jitter,
                seed=self.seed + 1,
                margin=margin,
            )
        return out

    def embed_base(self, samples: dict) -> dict:
        return {name: self.tube.embed(name, X) for name, X in samples.items()}


def _param_chart(spec: dict, name: str) -> Chart:
    return make_chart(
        name,
        [str(p) for p in spec["params"]],
        spec["box"],
        spec.get("periodic"),
    )


def _chart_from_decl(spec: dict) -> Chart:
    return make_chart(
        str(spec["name"]), [str(c) for c in spec["coords"]], spec["box"], spec.get("periodic")
    )


# --------------------------------------------------------------------------
# construction


def _construct_base(scn: Scenario, tube: TubeComplexification, ctx: RunContext):
    """Pre-convexifier potential field and convexifier field per construction."""
    comp = scn.complexification
    kind = comp["construction"]
    atlas = scn.atlas
    if kind == "local":
        if len(atlas.charts) != 1:
            raise ScenarioError("local construction needs a single chart", "complexification")
        (name,) = atlas.charts
        ch = atlas.chart(name)
        rho = ScalarField.single(name, local_potential(ch.coords, scn.eta.on(name)))
        nu = convexifier_field(chart_name=name, base_coords=ch.coords)
        return rho, nu
    if kind == "patched":
        part_spec = comp["partition"]
        bumps = tuple(
            Bump(
                chart=b["chart"],
                center=b["center"],
                halfwidth=b["halfwidth"],
                shape=b.get("shape", "box"),
            )
            for b in part_spec["bumps"]
        )
        partition = PartitionOfUnity(atlas=atlas, bumps=bumps, vanishing_box=part_spec.get("vanishing_box") or None)
        locals_ = {}
        for b in bumps:
            ch = atlas.chart(b.chart)
            locals_[b] = local_potential(ch.coords, scn.eta.on(b.chart))
        cover_samples = ctx.base_samples(margin=0.0, jitter=0.0)
        rho = patch(locals_, partition, samples=cover_samples)
        nu = convexifier_field(partition)
        return rho, nu
    if kind == "frame":
        fr = comp["frame"]
        name = fr["chart"]
        ch = atlas.chart(name)
        fd = frame_decompose(scn.eta, name, fr["g_coords"], fr["s_coords"])
        theta = product_potential(fd).rescope(tube_scope(ch.coords))
        ctx.frame = fd
        ctx.theta_pre = theta
        rho = ScalarField.single(name, theta)
        nu = convexifier_field(chart_name=name, base_coords=ch.coords)
        return rho, nu
    raise ScenarioError(f"unknown construction '{kind}'", "complexification.construction")


def _validate_holomorphy(scn: Scenario, ctx: RunContext, tol: float = 1e-8):
    """Tube extensions (transitions and action maps) satisfy Cauchy-Riemann."""
    tube_pts = ctx.tube_samples(margin=0.3)
    for t in scn.atlas.transitions:
        tt = None
        for cand in ctx.tube.tube.transitions:
            if cand.name == t.name:
                tt = cand
        X = tube_pts[t.src]
        keep = tt.in_domain(X) if tt is not None else np.ones(X.shape[0], bool)
        Xk = X[keep][:64]
        if Xk.shape[0] and t.tube_exprs is not None:
            res = holomorphy_residual(t.tube_exprs, t.exprs, Xk)
            if res > tol:
                raise ScenarioError(f"transition '{t.name}' tube extension is not holomorphic ({res:.2e})")
    action = scn.action
    if action is not None and action.tube_maps is not None:
        elems = action.group.sample_elements()[:4]
        for name in scn.atlas.charts:
            X = tube_pts[name][:64]
            for g in elems:
                te = action.map_exprs(name, g, tube=True)
                be = action.map_exprs(name, g, tube=False)
                res = holomorphy_residual(te, be, X)
                if res > tol:
                    raise ScenarioError(f"action tube map is not holomorphic on '{name}' ({res:.2e})")


def construct(ctx: RunContext):
    """Radius/lambda sweep until the potential is strictly psh on the tube grid.

    The group average and the metric are linear in the potential, so the
    averaged patched part and the averaged convexifier are evaluated once per
    radius and the lambda sweep reduces to eigenvalue checks of g_rho + lam g_nu.
    """
    scn = ctx.scenario
    comp = scn.complexification
    r0 = comp["radius"]
    lam0 = comp["lambda"] if comp["lambda"] > 0 else 1.0
    last = ""
    for halving in range(RADIUS_HALVINGS + 1):
        r = r0 / (2 ** halving)
        tube = complexify(scn.atlas, r)
        ctx.tube = tube
        _validate_holomorphy(scn, ctx)
        rho_base, nu = _construct_base(scn, tube, ctx)
        rho_avg, nu_avg = rho_base, nu
        if comp.get("average") and scn.action is not None:
            n_nodes = comp.get("quadrature_n", 64)
            rho_avg = average(rho_base, scn.action, n_nodes)
            nu_avg = average(nu, scn.action, n_nodes)
        # positivity is reported off the deterministic lattice so the minimum
        # is identical across jitter seeds
        samples = ctx.tube_samples(jitter=0.0)
        g_rho, g_nu = {}, {}
        count = 0
        for name, X in samples.items():
            n = X.shape[1] // 2
            J = j_matrix(n)
            _, _, hr = rho_avg.evaluate(name, X, MODE_HESS)
            _, _, hn = nu_avg.evaluate(name, X, MODE_HESS)
            Hr = unpack_hessian(hr, 2 * n)
            Hn = unpack_hessian(hn, 2 * n)
            g_rho[name] = Hr - J @ Hr @ J
            g_nu[name] = Hn - J @ Hn @ J
            count += X.shape[0]
        lam = lam0
        prev_min = -math.inf
        while lam <= LAMBDA_CAP:
            min_eig = math.inf
            for name in samples:
                g = g_rho[name] + lam * g_nu[name]
                g = 0.5 * (g + np.swapaxes(g, 1, 2))
                ev = np.linalg.eigvalsh(g)[:, 0]
                min_eig = min(min_eig, float(np.min(ev))) if ev.size else min_eig
            if min_eig > 0.0:
                ctx.rho = rho_avg + nu_avg.scale(lam)
                ctx.nu = nu
                ctx.lam_used = lam
                ctx.radius_used = r
                from ..complexify import SpshReport

                ctx.cache["spsh_report"] = SpshReport(min_eig=min_eig, samples=count, passed=True)
                # the d^c convention check runs on the cheaper pre-average field
                ctx.cache["dc_field"] = convexify(rho_base, nu, lam)
                return
            last = f"spsh min eig {min_eig:.3e} at lambda={lam}, r={r}"
            if min_eig <= prev_min:
                # more convexifier is not helping; shrink the tube instead
                break
            prev_min = min_eig
            lam *= 2.0
    ctx.construction_error = f"construction failed: {last} (lambda cap {LAMBDA_CAP})"


# --------------------------------------------------------------------------
# individual checks: each returns (value, passed, n_samples, note)


def _check_atlas_transitions(ctx, tol):
    scn = ctx.scenario
    worst, count = 0.0, 0
    for t in scn.atlas.transitions:
        ch = scn.atlas.chart(t.src)
        X = lattice(ch, ctx._res((7,) * ch.dim), jitter=0.0, seed=ctx.seed)
        keep = t.in_domain(X)
        Y = t.apply(X[keep])
        inside = np.asarray(scn.atlas.chart(t.dst).contains(Y))
        Xk = X[keep][inside]
        if Xk.shape[0] == 0:
            continue
        worst = max(worst, transition_roundtrip_residual(scn.atlas, t, Xk))
        count += Xk.shape[0]
    return worst, worst < tol, count, ""


def _check_oneform_overlap(ctx, tol):
    scn = ctx.scenario
    worst, count = 0.0, 0
    for t in scn.atlas.transitions:
        ch = scn.atlas.chart(t.src)
        X = lattice(ch, ctx._res((7,) * ch.dim), jitter=ctx.jitter, seed=ctx.seed)
        keep = t.in_domain(X)
        Xk = X[keep]
        if Xk.shape[0] == 0:
            continue
        worst = max(worst, oneform_overlap_residual(scn.atlas, scn.eta, t, Xk))
        count += Xk.shape[0]
    return worst, worst < tol, count, ""


def _check_contact(ctx, tol):
    samples = ctx.base_samples()
    rep = contact_check(ctx.scenario.eta, samples, threshold=tol)
    return rep.min_abs, rep.passed, rep.samples, ""


def _check_eta_invariance(ctx, tol):
    # margin 0.5 keeps translated/rotated sample points inside the chart box
    scn = ctx.scenario
    samples = ctx.base_samples(key="invariance_grid", margin=0.5)
    res = invariance_residual(scn.action, scn.eta, samples, scn.atlas)
    cons = action_consistency_residual(scn.action, samples, scn.atlas)
    worst = max(res, cons)
    n = sum(x.shape[0] for x in samples.values())
    return worst, worst < tol, n, f"composition residual {cons:.1e}"


def _check_dc_consistency(ctx, tol):
    field_ = ctx.cache.get("dc_field", ctx.rho)
    worst, count = 0.0, 0
    for name, X in ctx.tube_samples(key="dc_grid", margin=0.2).items():
        worst = max(worst, dc_consistency_residual(field_, name, X))
        count += X.shape[0]
    return worst, worst < tol, count, ""


def _check_spsh(ctx, tol):
    rep = ctx.cache.get("spsh_report")
    if rep is None:
        rep = spsh_check(ctx.rho, ctx.tube_samples(jitter=0.0))
    return rep.min_eig, rep.min_eig > tol, rep.samples, f"lambda={ctx.lam_used}"


def _extension_residual(ctx, field_, samples):
    scn = ctx.scenario
    worst, count = 0.0, 0
    for name, X in samples.items():
        n = X.shape[1]
        E = ctx.tube.embed(name, X)
        _, g, _ = field_.evaluate(name, E, MODE_GRAD)
        pull = dc_from_gradient(g)[:, :n]
        eta_vals = scn.eta.at(name, X)
        worst = max(worst, float(np.max(np.abs(pull - eta_vals))))
        count += X.shape[0]
    return worst, count


def _check_extension_pullback(ctx, tol):
    worst, count = _extension_residual(ctx, ctx.rho, ctx.base_samples())
    return worst, worst < tol, count, f"lambda={ctx.lam_used}, r={ctx.radius_used}"


def _check_rho_vanishes(ctx, tol):
    worst, count = 0.0, 0
    for name, X in ctx.base_samples().items():
        E = ctx.tube.embed(name, X)
        v = ctx.rho.values(name, E)
        worst = max(worst, float(np.max(np.abs(v))))
        count += X.shape[0]
    return worst, worst < tol, count, ""


def _check_rho_invariance(ctx, tol):
    scn = ctx.scenario
    samples = ctx.tube_samples(key="tube_grid", margin=0.35)
    res = invariance_residual(scn.action, ctx.rho, samples, ctx.tube.tube, tube=True)
    # invariant functions are annihilated by the generators
    ann = 0.0
    if not scn.action.group.is_finite:
        for name, X in samples.items():
            _, g, _ = ctx.rho.evaluate(name, X, MODE_GRAD)
            for xi in scn.action.lie_basis():
                gen = generator_at(scn.action, name, xi, X, tube=True)
                ann = max(ann, float(np.max(np.abs(np.sum(g * gen, axis=1)))))
    worst = max(res, ann)
    n = sum(x.shape[0] for x in samples.values())
    return worst, worst < tol, n, f"generator annihilation {ann:.1e}"


def _check_cr_levi(ctx, tol):
    seeds = ctx.tube_samples(key="cr_seed_grid", margin=0.25)
    rep = cr_hypersurface(ctx.rho, ctx.tube, seeds)
    note = f"min |d rho|={rep.min_drho:.2e}, dim H={rep.h_dim}"
    value = rep.levi_min
    if not math.isfinite(value):
        # 2-real-dimensional tubes have trivial H_p; report the regular-level margin
        value = rep.min_drho
        note += ", Levi vacuous"
    return value, rep.passed, rep.samples, note


def _check_frame_reconstruction(ctx, tol):
    scn = ctx.scenario
    fr = scn.complexification["frame"]
    name = fr["chart"]
    X = ctx.base_samples()[name]
    res = frame_reconstruction_residual(ctx.frame, scn.eta, X)
    return res, res < tol, X.shape[0], ""


def _check_product_pullback(ctx, tol):
    scn = ctx.scenario
    name = scn.complexification["frame"]["chart"]
    pre = ScalarField.single(name, ctx.theta_pre)
    worst, count = _extension_residual(ctx, pre, {name: ctx.base_samples()[name]})
    return worst, worst < tol, count, "Theta + theta_S before convexifier"


def _check_tangency(ctx, tol):
    scn = ctx.scenario
    fr = scn.complexification.get("frame", {})
    xis = [tuple(g) for g in fr.get("compact_generators", [])]
    name = fr.get("chart") or next(iter(scn.atlas.charts))
    X = ctx.base_samples()[name]
    res = tangency_residual(ctx.rho, scn.action, name, xis, X)
    note = "vacuous: trivial maximal compact factor" if not xis else ""
    return res, res < tol, X.shape[0], note


def _check_hamiltonian(ctx, tol):
    worst, count = 0.0, 0
    for name, X in ctx.tube_samples(margin=0.2).items():
        X = X[:: max(1, X.shape[0] // 400)]
        worst = max(worst, hamiltonian_residual(ctx.rho, ctx.scenario.action, name, X))
        count += X.shape[0]
    return worst, worst < tol, count, ""


def _check_moment_extension(ctx, tol):
    worst, count = 0.0, 0
    for name, X in ctx.base_samples().items():
        X = X[:: max(1, X.shape[0] // 500)]
        worst = max(worst, moment_extension_residual(ctx.rho, ctx.scenario.eta, ctx.scenario.action, name, X))
        count += X.shape[0]
    return worst, worst < tol, count, ""


def _moment_exprs(ctx, chart_name):
    scn = ctx.scenario
    return [
        contact_moment_expr(scn.eta, scn.action, chart_name, xi) for xi in scn.action.lie_basis()
    ]


def _check_zero_level(ctx, tol):
    scn = ctx.scenario
    q = scn.quotient or {}
    if q.get("level_empty"):
        best = math.inf
        count = 0
        for name, X in ctx.base_samples().items():
            for mu in _moment_exprs(ctx, name):
                best = min(best, float(np.min(np.abs(values(mu, X)))))
            count += X.shape[0]
        # moment bounded away from zero: the level set is empty, reported as such
        return 0.0, best > 1e-6, count, f"empty level (min |mu| = {best:.3e})"
    spec = q["contact"]
    name = spec["chart"]
    pch = _param_chart(spec["level"], "level")
    P = lattice(pch, ctx._res(ctx.scenario.samples.get("level_grid", (9,) * pch.dim)), jitter=ctx.jitter, seed=ctx.seed)
    embed = _parse_vec_cached(ctx, spec["level"]["embed"], pch.coords, "contact level")
    X = eval_vector(embed, P)
    worst = 0.0
    for mu in _moment_exprs(ctx, name):
        worst = max(worst, float(np.max(np.abs(values(mu, X)))))
    count = X.shape[0]
    note = ""
    kq = q.get("kahler")
    if kq is not None and ctx.rho is not None:
        kch = _param_chart(kq["level"], "klevel")
        KP = lattice(kch, ctx._res(ctx.scenario.samples.get("kahler_level_grid", (3,) * kch.dim)), jitter=ctx.jitter, seed=ctx.seed)
        kembed = _parse_vec_cached(ctx, kq["level"]["embed"], kch.coords, "kahler level")
        KX = eval_vector(kembed, KP)
        for xi in ctx.scenario.action.lie_basis():
            worst = max(worst, float(np.max(np.abs(kahler_moment(ctx.rho, ctx.scenario.action, kq["chart"], xi, KX)))))
        count += KX.shape[0]
        note = "contact and Kahler levels"
    return worst, worst < tol, count, note


def _parse_vec_cached(ctx, texts, scope, label):
    key = (label, tuple(str(t) for t in texts), tuple(scope))
    if key not in ctx.cache:
        ctx.cache[key] = tuple(parse(str(t), scope) for t in texts)
    return ctx.cache[key]


def _contact_quotient(ctx) -> Quotient:
    scn = ctx.scenario
    spec = scn.quotient["contact"]
    name = spec["chart"]
    ch = scn.atlas.chart(name)
    pch = _param_chart(spec["level"], "level")
    base = _chart_from_decl(spec["base_chart"])
    return Quotient(
        action=scn.action,
        chart=name,
        level_chart=pch,
        level_embed=_parse_vec_cached(ctx, spec["level"]["embed"], pch.coords, "c.embed"),
        section=_parse_vec_cached(ctx, spec["section"], base.coords, "c.section"),
        projection=_parse_vec_cached(ctx, spec["projection"], ch.coords, "c.projection"),
        base_chart=base,
        orbit_coord_index=spec.get("orbit_coord_index"),
    )


def _kahler_quotient(ctx) -> Quotient:
    scn = ctx.scenario
    spec = scn.quotient["kahler"]
    name = spec["chart"]
    tch = ctx.tube.tube.chart(name)
    pch = _param_chart(spec["level"], "klevel")
    base = _chart_from_decl(spec["base_chart"])
    return Quotient(
        action=scn.action,
        chart=name,
        level_chart=pch,
        level_embed=_parse_vec_cached(ctx, spec["level"]["embed"], pch.coords, "k.embed"),
        section=_parse_vec_cached(ctx, spec["section"], base.coords, "k.section"),
        projection=_parse_vec_cached(ctx, spec["projection"], tch.coords, "k.projection"),
        base_chart=base,
        orbit_coord_index=spec.get("orbit_coord_index"),
    )


def _level_lattice(ctx, q: Quotient, key, default):
    res = ctx.scenario.samples.get(key, default)
    return lattice(q.level_chart, ctx._res(res), jitter=ctx.jitter, seed=ctx.seed + 2)


def _check_contact_reduce(ctx, tol):
    scn = ctx.scenario
    q = _contact_quotient(ctx)
    L = _level_lattice(ctx, q, "level_grid", (9,) * q.level_chart.dim)
    B = lattice(q.base_chart, ctx._res(ctx.scenario.samples.get("reduced_base_grid", (17,) * q.base_chart.dim)), jitter=ctx.jitter, seed=ctx.seed)
    quotient_consistency(q, B, L)
    red = contact_reduce(scn.eta, q, L)
    ctx.cache["contact_red"] = (q, red, L)
    note = ""
    expected = scn.quotient["contact"].get("expected_coeffs")
    closed = 0.0
    if expected:
        exp = _parse_vec_cached(ctx, expected, q.base_chart.coords, "c.expected")
        for e, c in zip(exp, red.coeffs):
            diff = values(c, B) - values(e, B)
            closed = max(closed, float(np.max(np.abs(diff))))
        note = f"closed-form residual {closed:.2e}"
    passed = red.defining_residual < tol and closed < 1e-8
    return red.defining_residual, passed, red.samples, note


def _check_perturbation(ctx, tol):
    scn = ctx.scenario
    q, red, L = ctx.cache["contact_red"]
    val = perturbation_certificate(scn.eta, q, red, L, eps=1e-3)
    return val, val > tol, L.shape[0], "eps=1e-3"


def _check_section_independence(ctx, tol):
    scn = ctx.scenario
    q, red, L = ctx.cache["contact_red"]
    alt = scn.quotient["contact"].get("alternate_section")
    alt_exprs = _parse_vec_cached(ctx, alt, q.base_chart.coords, "c.alt")
    res = section_independence_residual(scn.eta, q, alt_exprs, L)
    return res, res < tol, L.shape[0], ""


def _check_kahler_reduce(ctx, tol):
    q = _kahler_quotient(ctx)
    L = _level_lattice(ctx, q, "kahler_level_grid", (3,) * q.level_chart.dim)
    T = lattice(q.base_chart, ctx._res(ctx.scenario.samples.get("reduced_tube_grid", (5,) * q.base_chart.dim)), jitter=ctx.jitter, seed=ctx.seed, margin=0.15)
    B = lattice(q.base_chart, (3,) * q.base_chart.dim, jitter=0.0, seed=ctx.seed, margin=0.3)
    quotient_consistency(q, B, L[: max(1, L.shape[0] // 4)], tube=True)
    red = kahler_reduce(ctx.rho, q, L, T)
    ctx.cache["kahler_red"] = (q, red)
    passed = red.defining_residual < tol and red.min_eig > 0.0
    return red.defining_residual, passed, red.samples, f"reduced spsh min eig {red.min_eig:.3e}"


def _check_compatibility(ctx, tol):
    scn = ctx.scenario
    _, red_c, _ = ctx.cache["contact_red"]
    qk, red_k = ctx.cache["kahler_red"]
    spec = scn.quotient["kahler"]
    cb = ctx.cache["contact_red"][0].base_chart
    embed = _parse_vec_cached(ctx, spec["contact_embed"], cb.coords, "k.contact_embed")
    B = lattice(cb, ctx._res(ctx.scenario.samples.get("reduced_base_grid", (17,) * cb.dim)), jitter=ctx.jitter, seed=ctx.seed)
    rep = compatibility_check(red_k.rho_red, red_c, embed, B, qk.base_chart.name)
    worst = max(rep.form_residual, rep.omega_residual)
    note = f"form {rep.form_residual:.2e}, omega {rep.omega_residual:.2e}"
    return worst, worst < tol, rep.samples, note


def _check_cr_reduce(ctx, tol):
    scn = ctx.scenario
    _, red_c, _ = ctx.cache["contact_red"]
    qk, red_k = ctx.cache["kahler_red"]
    spec = scn.quotient["kahler"]
    cb = ctx.cache["contact_red"][0].base_chart
    embed = _parse_vec_cached(ctx, spec["contact_embed"], cb.coords, "k.contact_embed")
    B = lattice(cb, ctx._res(ctx.scenario.samples.get("reduced_base_grid", (17,) * cb.dim)), jitter=ctx.jitter, seed=ctx.seed)
    seeds = lattice(qk.base_chart, ctx._res(ctx.scenario.samples.get("cr_reduce_seed_grid", (3,) * qk.base_chart.dim)), jitter=ctx.jitter, seed=ctx.seed + 3, margin=0.25)
    L = _level_lattice(ctx, qk, "kahler_level_grid", (3,) * qk.level_chart.dim)
    up = eval_vector(qk.level_embed, L[: max(1, L.shape[0] // 6)])
    rep = cr_reduce(red_k.rho_red, red_c, qk, qk.base_chart.name, seeds, embed, B, rho=ctx.rho, level_tube_points=up)
    worst = max(rep.form_residual, rep.upstairs_residual)
    passed = worst < tol and rep.min_contact > 1e-8
    note = f"min top-wedge {rep.min_contact:.2e}, upstairs {rep.upstairs_residual:.2e}"
    return worst, passed, rep.samples, note


def _check_kappa_rank(ctx, tol):
    scn = ctx.scenario
    q = _kahler_quotient(ctx)
    L = _level_lattice(ctx, q, "kappa_level_grid", ctx.scenario.samples.get("kahler_level_grid", (3,) * q.level_chart.dim))
    X = eval_vector(q.level_embed, L)
    rep = kappa_rank_check(ctx.rho, q, X, svd_tol=1e-8)
    m = X.shape[1]
    k = scn.action.group.k
    want = (m - k, m - 2 * k, m - 2 * k)
    got = (rep.ker_dim, rep.complement_dim, rep.rank)
    note = f"dims {got} (expected {want})"
    return rep.min_sv, got == want and rep.min_sv > tol, rep.samples, note


def _check_symplectify(ctx, tol):
    scn = ctx.scenario
    (name,) = scn.atlas.charts
    ch = scn.atlas.chart(name)
    sy = scn.complexification.get("symplectify", {})
    prod = symplectify(
        ch,
        ctx.rho.expr_on(name),
        ctx.nu.expr_on(name),
        lam=sy.get("lambda", 1.0),
        t_name=sy.get("t_name", "t"),
        t_box=sy.get("t_box", (-1.0, 1.0)),
        radius=ctx.radius_used,
    )
    res = ctx.scenario.samples.get("product_grid", {}).get(name, (7,) * (ch.dim + 1))
    MR = lattice(prod.chart, ctx._res(res), jitter=ctx.jitter, seed=ctx.seed)
    rep = symplectify_identities(prod, scn.eta, ch, MR)
    tube_pts = lattice(prod.tube_chart, (3,) * prod.tube_chart.dim, jitter=ctx.jitter, seed=ctx.seed, margin=0.2)
    sp = spsh_check(prod.rho_hat, {prod.chart.name: tube_pts})
    worst = max(rep.dd_residual, rep.form_residual)
    passed = worst < tol and sp.min_eig > 0.0
    note = f"dd {rep.dd_residual:.2e}, slice {rep.form_residual:.2e}, product spsh {sp.min_eig:.2e}"
    return worst, passed, rep.samples + sp.samples, note


def _expected_label(ctx, isotropy_decl):
    group = ctx.scenario.action.group
    if group.is_finite:
        H = frozenset(isotropy_decl)
        cls = group.conjugacy_class_of_subgroup(H)
        return tuple(sorted(tuple(sorted(s)) for s in cls))
    return isotropy_decl  # "full" | "trivial"


def _check_stratify(ctx, tol):
    scn = ctx.scenario
    spec = scn.quotient["stratify"]
    strata = {s["id"]: s for s in scn.quotient["strata"]}
    fixed_label = _expected_label(ctx, strata[spec["fixed_stratum"]]["isotropy"])
    free_label = _expected_label(ctx, strata[spec["free_stratum"]]["isotropy"])
    samples = {}
    for name, res in (scn.samples.get("stratum_grid") or {}).items():
        samples[name] = inclusive_lattice(scn.atlas.chart(name), ctx._res(res, keep_odd=True))
    strat = stratify_samples(scn.action, samples)
    mismatched = 0
    total = 0
    for name, X in samples.items():
        idx = spec["fixed_coords"][name]
        on_axis = np.all(X[:, idx] == 0.0, axis=1)
        for b in range(X.shape[0]):
            want = fixed_label if on_axis[b] else free_label
            got = strat.label_of[name][b]
            if got != want:
                mismatched += 1
            total += 1
    ctx.cache["stratification"] = strat
    return float(mismatched), mismatched == 0, total, f"{total} classified"


def _restrict_field(ctx, chart_name, frozen_base):
    """rho restricted to the complex stratum (frozen base coords and partners)."""
    scope = ctx.rho.scope_on(chart_name)
    frozen = set(frozen_base) | {imag_name(c) for c in frozen_base}
    new_scope = tuple(c for c in scope if c not in frozen)
    from ..expr import const as _const

    table = {c: _const(0.0, new_scope) for c in frozen}
    terms = [t.compose(table, new_scope) for t in ctx.rho.terms[chart_name]]
    return ScalarField({chart_name: tuple(terms)}), new_scope


def _check_stratified_reduce(ctx, tol):
    scn = ctx.scenario
    worst = 0.0
    min_wedge = math.inf
    min_tr = math.inf
    count = 0
    notes = []
    group = scn.action.group
    for st in scn.quotient["strata"]:
        sid = st["id"]
        if st["kind"] == "embedded":
            for name, cspec in st["charts"].items():
                pch = _param_chart(cspec, f"{sid}_{name}")
                P = lattice(pch, ctx._res(cspec.get("grid", (17,) * pch.dim)), jitter=ctx.jitter, seed=ctx.seed)
                embed = _parse_vec_cached(ctx, cspec["embed"], pch.coords, f"{sid}.{name}.embed")
                # (a) the restricted form is contact on the stratum
                eta_str = pullback_symbolic(embed, scn.eta.on(name), pch.coords)
                w = wedge_top(OneForm({pch.name: eta_str}), pch.name, P)
                min_wedge = min(min_wedge, float(np.min(np.abs(w))))
                # expected reduced form (L acts trivially on embedded strata here)
                exp = st.get("eta_red")
                if isinstance(exp, dict):
                    exp = exp.get(name)
                if exp:
                    exp_exprs = _parse_vec_cached(ctx, exp, pch.coords, f"{sid}.{name}.eta_red")
                    for e, c in zip(exp_exprs, eta_str):
                        worst = max(worst, float(np.max(np.abs(values(c, P) - values(e, P)))))
                # (b) totally real embedding of the stratum in its complex stratum
                min_tr = min(min_tr, _totally_real_min_sv(embed, P))
                # (c) iota* d^c (rho | complex stratum) = eta_stratum
                frozen = cspec.get("frozen", [])
                restricted, new_scope = _restrict_field(ctx, name, frozen)
                active = [c for c in scn.atlas.chart(name).coords if c not in frozen]
                E = np.zeros((P.shape[0], len(new_scope)))
                emb_by_name = dict(zip(scn.atlas.chart(name).coords, embed))
                for j, c in enumerate(active):
                    E[:, j] = values(emb_by_name[c], P)
                v, g, _ = restricted.evaluate(name, E, MODE_GRAD)
                worst = max(worst, float(np.max(np.abs(v))))
                dc = dc_from_gradient(g)[:, : len(active)]
                # pull back to stratum parameters through the active embedding
                Dact = np.stack([np.stack([values(emb_by_name[c].diff(p), P) for c in active], axis=-1) for p in pch.coords], axis=1)
                pulled = np.einsum("bpm,bm->bp", Dact, dc)
                eta_vals = np.stack([values(c, P) for c in eta_str], axis=-1)
                worst = max(worst, float(np.max(np.abs(pulled - eta_vals))))
                count += P.shape[0]
        else:  # open stratum
            for name, cspec in st["charts"].items():
                region = make_chart(f"{sid}_{name}", scn.atlas.chart(name).coords, cspec["region"])
                X = lattice(region, ctx._res(cspec.get("grid", (5,) * region.dim)), jitter=ctx.jitter, seed=ctx.seed)
                w = wedge_top(scn.eta, name, X)
                min_wedge = min(min_wedge, float(np.min(np.abs(w))))
                min_tr = min(min_tr, _totally_real_min_sv_identity(X.shape[1]))
                if st.get("level_empty"):
                    best = math.inf
                    for mu in _moment_exprs(ctx, name):
                        best = min(best, float(np.min(np.abs(values(mu, X)))))
                    if not best > 1e-6:
                        worst = max(worst, 1.0)
                    notes.append(f"{sid}/{name}: empty level (min |mu| = {best:.2e})")
                else:
                    res, _ = _extension_residual(ctx, ctx.rho, {name: X})
                    worst = max(worst, res)
                count += X.shape[0]
    passed = worst < tol and min_wedge > 1e-8 and min_tr > 1e-8
    note = f"min wedge {min_wedge:.2e}, totally-real sv {min_tr:.2e}"
    if notes:
        note += "; " + "; ".join(notes)
    return worst, passed, count, note


def _totally_real_min_sv(embed, P):
    """J(T stratum) meets T stratum only at 0: [V, JV] keeps full rank."""
    _, DE = jacobian(embed, P)  # (B, n, d)
    B, n, d = DE.shape
    J = j_matrix(n)
    best = math.inf
    for b in range(B):
        V = np.zeros((2 * n, d))
        V[:n] = DE[b]
        W = np.concatenate([V, J @ V], axis=1)
        sv = np.linalg.svd(W, compute_uv=False)
        best = min(best, float(sv[2 * d - 1]))
    return best


def _totally_real_min_sv_identity(n):
    J = j_matrix(n)
    V = np.zeros((2 * n, n))
    V[:n] = np.eye(n)
    W = np.concatenate([V, J @ V], axis=1)
    return float(np.linalg.svd(W, compute_uv=False)[2 * n - 1])


# --------------------------------------------------------------------------
# registry and driver

_CONSTRUCTION = "__construction__"

# id -> (default tolerance or callable(ctx), dependencies, function)
REGISTRY = {
    "atlas_transitions": (1e-10, (), _check_atlas_transitions),
    "oneform_overlap": (1e-8, (), _check_oneform_overlap),
    "contact": (1e-8, (), _check_contact),
    "eta_invariance": (1e-10, (), _check_eta_invariance),
    "dc_consistency": (1e-12, (_CONSTRUCTION,), _check_dc_consistency),
    "extension_pullback": (1e-8, (_CONSTRUCTION,), _check_extension_pullback),
    "rho_vanishes": (1e-12, (_CONSTRUCTION,), _check_rho_vanishes),
    "spsh": (0.0, (_CONSTRUCTION,), _check_spsh),
    "rho_invariance": (
        lambda ctx: 1e-10 if ctx.scenario.group is not None and ctx.scenario.group.is_finite else 1e-8,
        (_CONSTRUCTION,),
        _check_rho_invariance,
    ),
    "cr_levi": (0.0, (_CONSTRUCTION, "spsh"), _check_cr_levi),
    "frame_reconstruction": (1e-8, (_CONSTRUCTION,), _check_frame_reconstruction),
    "product_pullback": (1e-8, (_CONSTRUCTION,), _check_product_pullback),
    "tangency": (1e-8, (_CONSTRUCTION,), _check_tangency),
    "hamiltonian": (1e-8, (_CONSTRUCTION,), _check_hamiltonian),
    "moment_extension": (1e-10, (_CONSTRUCTION,), _check_moment_extension),
    "zero_level": (1e-10, (_CONSTRUCTION,), _check_zero_level),
    "contact_reduce": (1e-10, (_CONSTRUCTION, "eta_invariance"), _check_contact_reduce),
    "perturbation": (5e-4, ("contact_reduce",), _check_perturbation),
    "section_independence": (1e-8, ("contact_reduce",), _check_section_independence),
    "kahler_reduce": (1e-10, (_CONSTRUCTION,), _check_kahler_reduce),
    "compatibility": (1e-8, ("contact_reduce", "kahler_reduce"), _check_compatibility),
    "cr_reduce": (1e-8, ("contact_reduce", "kahler_reduce"), _check_cr_reduce),
    "kappa_rank": (1e-8, (_CONSTRUCTION,), _check_kappa_rank),
    "symplectify": (1e-8, (_CONSTRUCTION,), _check_symplectify),
    "stratify": (0.5, (), _check_stratify),
    "stratified_reduce": (1e-8, (_CONSTRUCTION, "stratify"), _check_stratified_reduce),
}


def run(scenario: Scenario, seed: int = None, samples_scale: float = 1.0, workers: int = None, tolerances: dict = None) -> VerificationReport:
    """Execute every declared check; returns the deterministic report."""
    seed = int(scenario.samples.get("seed", 42)) if seed is None else int(seed)
    ctx = RunContext(scenario=scenario, seed=seed, scale=float(samples_scale))
    report = VerificationReport(scenario=scenario.name, seed=seed, version=__version__)

    ids = scenario.check_ids()
    needs_construction = any(_CONSTRUCTION in REGISTRY[i][1] for i in ids)
    t0 = time.perf_counter()
    construction_ok = True
    if needs_construction:
        try:
            construct(ctx)
        except ContactcxError as exc:
            ctx.construction_error = str(exc)
        if ctx.rho is None:
            construction_ok = False

    status: dict = {_CONSTRUCTION: "pass" if construction_ok else "fail"}
    records: dict = {}
    order = [i for i in ids]

    def ready(cid):
        return all(status.get(dep) == "pass" for dep in REGISTRY[cid][1])

    def blocked(cid):
        return any(status.get(dep) in ("fail", "skipped") for dep in REGISTRY[cid][1])

    def run_one(cid):
        tol_default, _, fn = REGISTRY[cid]
        tol = tol_default(ctx) if callable(tol_default) else tol_default
        tol = scenario.tolerance(cid, tol)
        if tolerances and cid in tolerances:
            tol = float(tolerances[cid])
        t = time.perf_counter()
        try:
            value, passed, n, note = fn(ctx, tol)
        except Exception as exc:  # a failed check must not abort the report
            return CheckRecord(cid, float("nan"), tol, "fail", 0, (time.perf_counter() - t) * 1e3, f"{type(exc).__name__}: {exc}")
        ms = (time.perf_counter() - t) * 1e3
        return CheckRecord(cid, float(value), tol, "pass" if passed else "fail", int(n), ms, note)

    n_workers = workers if workers else (os.cpu_count() or 1)
    pending = list(order)
    while pending:
        wave = [cid for cid in pending if ready(cid)]
        stuck = [cid for cid in pending if blocked(cid)]
        for cid in stuck:
            why = ctx.construction_error if _CONSTRUCTION in REGISTRY[cid][1] and not construction_ok else "prerequisite failed"
            records[cid] = CheckRecord(cid, float("nan"), 0.0, "skipped", 0, 0.0, why)
            status[cid] = "skipped"
            pending.remove(cid)
        wave = [cid for cid in wave if cid in pending]
        if not wave:
            if pending:
                for cid in pending:
                    records[cid] = CheckRecord(cid, float("nan"), 0.0, "skipped", 0, 0.0, "unresolved dependency")
                    status[cid] = "skipped"
                pending = []
            break
        if n_workers > 1 and len(wave) > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                out = list(pool.map(run_one, wave))
        else:
            out = [run_one(cid) for cid in wave]
        for cid, rec in zip(wave, out):
            records[cid] = rec
            status[cid] = rec.status
            pending.remove(cid)

    if needs_construction and not construction_ok:
        # surface the sweep diagnosis on the spsh line if it was requested
        if "spsh" in records and records["spsh"].status == "skipped":
            records["spsh"].note = ctx.construction_error or "construction failed"
            records["spsh"].status = "fail"

    report.checks = [records[cid] for cid in order]
    # total wall time recorded on the report object for callers that need it
    report_total_ms = (time.perf_counter() - t0) * 1e3
    report.__dict__["total_ms"] = report_total_ms
    return report
