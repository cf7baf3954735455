"""Built-in example catalog E1-E7.

Each entry is the plain JSON-able dict a user scenario file would contain;
``builtin`` routes through the same loader as ``load``.  Numeric constants
(pi/2 etc.) are written at full double precision.
"""

from __future__ import annotations

import math

from ..errors import ScenarioError
from .schema import Scenario, load_dict

PI = math.pi
HALF_PI = math.pi / 2.0


def _box(lo, hi, n):
    return [[lo, hi]] * n


def _e1() -> dict:
    return {
        "name": "E1_R3_standard",
        "atlas": {"charts": [{"name": "c", "coords": ["x", "y", "z"], "box": _box(-1, 1, 3)}]},
        "one_form": {"c": ["0", "x", "1"]},
        "complexification": {"radius": 0.5, "lambda": 1.0, "construction": "local"},
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [11, 11, 11]},
            "tube_grid": {"c": [5, 5, 5, 3, 3, 3]},
            "dc_grid": {"c": [4, 4, 4, 3, 3, 3]},
            "cr_seed_grid": {"c": [4, 4, 4, 2, 2, 2]},
        },
        "checks": [
            "contact",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "cr_levi",
        ],
    }


def _e2() -> dict:
    w = 0.8 * PI
    return {
        "name": "E2_circle",
        "atlas": {
            "charts": [{"name": "c", "coords": ["th"], "box": [[0.0, 2.0 * PI]], "periodic": [True]}]
        },
        "one_form": {"c": ["1"]},
        "group": {"kind": "torus", "k": 1, "params": ["a"]},
        "action": {
            "maps": {"c": ["th + a"]},
            "tube_maps": {"c": ["th + a", "th_im"]},
        },
        "complexification": {
            "radius": 0.5,
            "lambda": 1.0,
            "construction": "patched",
            "average": True,
            "quadrature_n": 64,
            "partition": {
                "bumps": [
                    {"chart": "c", "center": [0.0], "halfwidth": [w]},
                    {"chart": "c", "center": [PI], "halfwidth": [w]},
                ]
            },
        },
        "quotient": {"level_empty": True},
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [1024]},
            "tube_grid": {"c": [64, 9]},
            "dc_grid": {"c": [40, 5]},
            "cr_seed_grid": {"c": [32, 4]},
            "invariance_grid": {"c": [48]},
        },
        "checks": [
            "contact",
            "eta_invariance",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "rho_invariance",
            "moment_extension",
            "zero_level",
            "cr_levi",
        ],
    }


def _e3() -> dict:
    two_pi = 2.0 * PI
    return {
        "name": "E3_T3",
        "atlas": {
            "charts": [
                {
                    "name": "c",
                    "coords": ["x", "y", "z"],
                    "box": _box(0.0, two_pi, 3),
                    "periodic": [True, True, True],
                }
            ]
        },
        "one_form": {"c": ["cos(z)", "sin(z)", "0"]},
        "group": {"kind": "torus", "k": 1, "params": ["a"]},
        "action": {
            "maps": {"c": ["x + a", "y", "z"]},
            "tube_maps": {"c": ["x + a", "y", "z", "x_im", "y_im", "z_im"]},
        },
        "complexification": {"radius": 0.5, "lambda": 1.0, "construction": "local"},
        "quotient": {
            "contact": {
                "chart": "c",
                "level": {
                    "params": ["p", "q"],
                    "box": [[0.0, two_pi], [0.0, two_pi]],
                    "periodic": [True, True],
                    "embed": ["p", "q", repr(HALF_PI)],
                },
                "section": ["0", "yr", repr(HALF_PI)],
                "projection": ["y"],
                "base_chart": {
                    "name": "red",
                    "coords": ["yr"],
                    "box": [[0.0, two_pi]],
                    "periodic": [True],
                },
                "orbit_coord_index": 0,
                "expected_coeffs": ["1"],
            },
            "kahler": {
                "chart": "c",
                "level": {
                    "params": ["p1", "p2", "p3", "p4", "p5"],
                    "box": [
                        [0.0, two_pi],
                        [0.0, two_pi],
                        [0.0, two_pi],
                        [-0.4, 0.4],
                        [-0.4, 0.4],
                    ],
                    "periodic": [True, True, True, False, False],
                    "embed": ["p1", "p2", "p3", "-cos(p3)/2.0", "p4", "p5"],
                },
                "section": ["0", "yr", "zr", "-cos(zr)/2.0", "yr_im", "zr_im"],
                "projection": ["y", "z", "y_im", "z_im"],
                "base_chart": {
                    "name": "kred",
                    "coords": ["yr", "zr", "yr_im", "zr_im"],
                    "box": [[0.0, two_pi], [0.0, two_pi], [-0.4, 0.4], [-0.4, 0.4]],
                    "periodic": [True, True, False, False],
                },
                "orbit_coord_index": 0,
                "contact_embed": ["yr", repr(HALF_PI), "0", "0"],
            },
        },
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [11, 11, 11]},
            "tube_grid": {"c": [5, 5, 5, 3, 3, 3]},
            "dc_grid": {"c": [4, 4, 4, 3, 3, 3]},
            "cr_seed_grid": {"c": [4, 4, 4, 2, 2, 2]},
            "level_grid": [17, 17],
            "kahler_level_grid": [4, 4, 4, 3, 3],
            "reduced_tube_grid": [9, 9, 5, 5],
            "reduced_base_grid": [33],
            "cr_reduce_seed_grid": [5, 5, 3, 3],
        },
        "checks": [
            "contact",
            "eta_invariance",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "rho_invariance",
            "hamiltonian",
            "moment_extension",
            "zero_level",
            "contact_reduce",
            "perturbation",
            "kahler_reduce",
            "compatibility",
            "cr_reduce",
            "kappa_rank",
            "cr_levi",
        ],
    }


def _e4() -> dict:
    return {
        "name": "E4_heisenberg_translation",
        "atlas": {"charts": [{"name": "c", "coords": ["x", "y", "z"], "box": _box(-1, 1, 3)}]},
        "one_form": {"c": ["0", "x", "1"]},
        "group": {"kind": "translation", "k": 1, "params": ["a"]},
        "action": {
            "maps": {"c": ["x", "y + a", "z"]},
            "tube_maps": {"c": ["x", "y + a", "z", "x_im", "y_im", "z_im"]},
        },
        "complexification": {
            "radius": 0.5,
            "lambda": 1.0,
            "construction": "frame",
            "frame": {"chart": "c", "g_coords": ["y"], "s_coords": ["x", "z"], "compact_generators": []},
            "symplectify": {"t_name": "t", "t_box": [-1.0, 1.0], "lambda": 1.0},
        },
        "quotient": {
            "contact": {
                "chart": "c",
                "level": {
                    "params": ["p", "q"],
                    "box": [[-1, 1], [-1, 1]],
                    "embed": ["0", "p", "q"],
                },
                "section": ["0", "0", "zr"],
                "projection": ["z"],
                "base_chart": {"name": "red", "coords": ["zr"], "box": [[-1, 1]]},
                "orbit_coord_index": 1,
                "expected_coeffs": ["1"],
                "alternate_section": ["0", "0.25 + 0.1*zr", "zr"],
            },
            "kahler": {
                "chart": "c",
                "level": {
                    "params": ["p1", "p2", "p3", "p4", "p5"],
                    "box": [[-1, 1], [-1, 1], [-0.4, 0.4], [-0.4, 0.4], [-0.4, 0.4]],
                    "embed": ["-2.0*p4", "p1", "p2", "p3", "p4", "p5"],
                },
                "section": ["xr", "0", "zr", "xr_im", "-xr/2.0", "zr_im"],
                "projection": ["x", "z", "x_im", "z_im"],
                "base_chart": {
                    "name": "kred",
                    "coords": ["xr", "zr", "xr_im", "zr_im"],
                    "box": [[-0.8, 0.8], [-1, 1], [-0.4, 0.4], [-0.4, 0.4]],
                },
                "orbit_coord_index": 1,
                "contact_embed": ["0", "zr", "0", "0"],
            },
        },
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [11, 11, 11]},
            "tube_grid": {"c": [5, 5, 5, 3, 3, 3]},
            "dc_grid": {"c": [4, 4, 4, 3, 3, 3]},
            "cr_seed_grid": {"c": [4, 4, 4, 2, 2, 2]},
            "level_grid": [17, 17],
            "kahler_level_grid": [4, 4, 4, 3, 3],
            "kappa_level_grid": [4, 5, 5, 1, 1],
            "reduced_tube_grid": [9, 9, 5, 5],
            "reduced_base_grid": [33],
            "cr_reduce_seed_grid": [5, 5, 3, 3],
            "product_grid": {"c": [7, 7, 7, 5]},
        },
        "checks": [
            "contact",
            "eta_invariance",
            "dc_consistency",
            "frame_reconstruction",
            "product_pullback",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "rho_invariance",
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
            "cr_levi",
        ],
    }


def _e5() -> dict:
    return {
        "name": "E5_Z2_stratified",
        "atlas": {"charts": [{"name": "c", "coords": ["x", "y", "z"], "box": _box(-1, 1, 3)}]},
        "one_form": {"c": ["0", "x", "1"]},
        "group": {
            "kind": "finite",
            "elements": ["e", "s"],
            "table": {"e": {"e": "e", "s": "s"}, "s": {"e": "s", "s": "e"}},
        },
        "action": {
            "maps": {
                "e": {"c": ["x", "y", "z"]},
                "s": {"c": ["-x", "-y", "z"]},
            },
            "tube_maps": {
                "e": {"c": ["x", "y", "z", "x_im", "y_im", "z_im"]},
                "s": {"c": ["-x", "-y", "z", "-x_im", "-y_im", "z_im"]},
            },
        },
        "complexification": {"radius": 0.5, "lambda": 1.0, "construction": "local", "average": True},
        "quotient": {
            "strata": [
                {
                    "id": "axis",
                    "kind": "embedded",
                    "isotropy": ["e", "s"],
                    "charts": {
                        "c": {
                            "params": ["p"],
                            "box": [[-1, 1]],
                            "embed": ["0", "0", "p"],
                            "frozen": ["x", "y"],
                            "grid": [41],
                        }
                    },
                    "eta_red": ["1"],
                },
                {
                    "id": "free",
                    "kind": "open",
                    "isotropy": ["e"],
                    "charts": {"c": {"region": [[0.15, 0.95], [-0.95, 0.95], [-0.95, 0.95]], "grid": [5, 5, 5]}},
                },
            ],
            "stratify": {"fixed_coords": {"c": [0, 1]}, "fixed_stratum": "axis", "free_stratum": "free"},
        },
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [11, 11, 11]},
            "tube_grid": {"c": [5, 5, 5, 3, 3, 3]},
            "dc_grid": {"c": [4, 4, 4, 3, 3, 3]},
            "cr_seed_grid": {"c": [4, 4, 4, 2, 2, 2]},
            "stratum_grid": {"c": [21, 21, 21]},
        },
        "checks": [
            "contact",
            "eta_invariance",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "rho_invariance",
            "stratify",
            "stratified_reduce",
            "cr_levi",
        ],
    }


def _sphere_eta(prefix: str, sign: int) -> list:
    """Chart coefficients of the round contact form under stereographic projection.

    sign +1: projection from the pole outside the chart (north chart), -1: south.
    """
    u1, u2, u3 = f"{prefix}1", f"{prefix}2", f"{prefix}3"
    P = f"(1.0 + {u1}^2 + {u2}^2 + {u3}^2)"
    s = "" if sign > 0 else "-"
    a1 = f"(-4.0*{u2} + {s}4.0*{u3}*{u1}) / {P}^2"
    a2 = f"(4.0*{u1} + {s}4.0*{u3}*{u2}) / {P}^2"
    if sign > 0:
        a3 = f"(2.0*{u3}^2 - 2.0*{u1}^2 - 2.0*{u2}^2 + 2.0) / {P}^2"
    else:
        a3 = f"(2.0*{u1}^2 + 2.0*{u2}^2 - 2.0*{u3}^2 - 2.0) / {P}^2"
    return [a1, a2, a3]


def _sphere_transition_tube(coords) -> list:
    """Holomorphic extension of u -> u/|u|^2: z_j / (z . z) componentwise."""
    u = list(coords)
    A = "(" + " + ".join(f"{c}^2" for c in u) + " - " + " - ".join(f"{c}_im^2" for c in u) + ")"
    B = "(2.0*(" + " + ".join(f"{c}*{c}_im" for c in u) + "))"
    D = f"({A}^2 + {B}^2)"
    real = [f"({c}*{A} + {c}_im*{B}) / {D}" for c in u]
    imag = [f"({c}_im*{A} - {c}*{B}) / {D}" for c in u]
    return real + imag


def _rotation_maps(coords, with_tube: bool):
    c1, c2, c3 = coords
    base = [f"{c1}*cos(a) - {c2}*sin(a)", f"{c1}*sin(a) + {c2}*cos(a)", c3]
    if not with_tube:
        return base
    return base + [
        f"{c1}_im*cos(a) - {c2}_im*sin(a)",
        f"{c1}_im*sin(a) + {c2}_im*cos(a)",
        f"{c3}_im",
    ]


def _e6() -> dict:
    coords_n = ["u1", "u2", "u3"]
    coords_s = ["v1", "v2", "v3"]
    inv_sq_n = [f"{c}/(u1^2 + u2^2 + u3^2)" for c in coords_n]
    inv_sq_s = [f"{c}/(v1^2 + v2^2 + v3^2)" for c in coords_s]
    vbox = [[-0.3, 0.3]] * 3
    return {
        "name": "E6_S1_on_S3",
        "atlas": {
            "charts": [
                {"name": "n", "coords": coords_n, "box": _box(-2, 2, 3)},
                {"name": "s", "coords": coords_s, "box": _box(-2, 2, 3)},
            ],
            "transitions": [
                {
                    "name": "n2s",
                    "src": "n",
                    "dst": "s",
                    "inverse": "s2n",
                    "exprs": inv_sq_n,
                    "tube_exprs": _sphere_transition_tube(coords_n),
                    "domain": {"box": _box(-6, 6, 3), "exclude_balls": [{"center": [0, 0, 0], "radius": 0.3}]},
                },
                {
                    "name": "s2n",
                    "src": "s",
                    "dst": "n",
                    "inverse": "n2s",
                    "exprs": inv_sq_s,
                    "tube_exprs": _sphere_transition_tube(coords_s),
                    "domain": {"box": _box(-6, 6, 3), "exclude_balls": [{"center": [0, 0, 0], "radius": 0.3}]},
                },
            ],
        },
        "one_form": {"n": _sphere_eta("u", +1), "s": _sphere_eta("v", -1)},
        "group": {"kind": "circle_matrix", "k": 1, "params": ["a"]},
        "action": {
            "maps": {"n": _rotation_maps(coords_n, False), "s": _rotation_maps(coords_s, False)},
            "tube_maps": {"n": _rotation_maps(coords_n, True), "s": _rotation_maps(coords_s, True)},
        },
        "complexification": {
            # partition-weight curvature needs the thin tube and the heavier
            # convexifier; the generic sweep finds the same values from 0.15/1.0
            "radius": 0.075,
            "lambda": 4.0,
            "construction": "patched",
            "average": True,
            # the ball bumps and the round form are exactly rotation
            # invariant, so the average is already exact at 8 nodes
            "quadrature_n": 8,
            "partition": {
                "bumps": [
                    {"chart": "n", "center": [0.0, 0.0, 0.0], "halfwidth": [1.5], "shape": "ball"},
                    {"chart": "s", "center": [0.0, 0.0, 0.0], "halfwidth": [1.5], "shape": "ball"},
                ],
                "vanishing_box": {"n": vbox, "s": vbox},
            },
        },
        "quotient": {
            "contact": {
                "chart": "n",
                "level": {"params": ["p"], "box": [[-1.8, 1.8]], "embed": ["0", "0", "p"]},
                "section": ["0", "0", "pr"],
                "projection": ["u3"],
                "base_chart": {"name": "red", "coords": ["pr"], "box": [[-1.8, 1.8]]},
                "expected_coeffs": ["2.0/(1.0 + pr^2)"],
            },
            "strata": [
                {
                    "id": "fixed_circle",
                    "kind": "embedded",
                    "isotropy": "full",
                    "charts": {
                        "n": {
                            "params": ["p"],
                            "box": [[-1.9, 1.9]],
                            "embed": ["0", "0", "p"],
                            "frozen": ["u1", "u2"],
                            "grid": [41],
                        },
                        "s": {
                            "params": ["p"],
                            "box": [[-1.9, 1.9]],
                            "embed": ["0", "0", "p"],
                            "frozen": ["v1", "v2"],
                            "grid": [41],
                        },
                    },
                    "eta_red": {"n": ["2.0/(1.0 + p^2)"], "s": ["-2.0/(1.0 + p^2)"]},
                },
                {
                    "id": "free",
                    "kind": "open",
                    "isotropy": "trivial",
                    "charts": {
                        "n": {"region": [[0.3, 1.9], [-1.9, 1.9], [-1.9, 1.9]], "grid": [4, 4, 4]},
                        "s": {"region": [[0.3, 1.9], [-1.9, 1.9], [-1.9, 1.9]], "grid": [4, 4, 4]},
                    },
                    "level_empty": True,
                },
            ],
            "stratify": {
                "fixed_coords": {"n": [0, 1], "s": [0, 1]},
                "fixed_stratum": "fixed_circle",
                "free_stratum": "free",
            },
        },
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"n": [8, 8, 8], "s": [8, 8, 8]},
            "tube_grid": {"n": [4, 4, 4, 2, 2, 2], "s": [4, 4, 4, 2, 2, 2]},
            "dc_grid": {"n": [3, 3, 3, 2, 2, 2], "s": [3, 3, 3, 2, 2, 2]},
            "cr_seed_grid": {"n": [3, 3, 3, 2, 2, 2], "s": [3, 3, 3, 2, 2, 2]},
            "invariance_grid": {"n": [5, 5, 5], "s": [5, 5, 5]},
            "level_grid": [33],
            "stratum_grid": {"n": [17, 17, 17], "s": [17, 17, 17]},
        },
        "checks": [
            "atlas_transitions",
            "oneform_overlap",
            "contact",
            "eta_invariance",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "rho_invariance",
            "hamiltonian",
            "moment_extension",
            "zero_level",
            "stratify",
            "stratified_reduce",
            "cr_levi",
        ],
    }


def _e7() -> dict:
    return {
        "name": "E7_symplectification_line",
        "atlas": {"charts": [{"name": "c", "coords": ["u"], "box": [[-1, 1]]}]},
        "one_form": {"c": ["1"]},
        "complexification": {
            "radius": 0.5,
            "lambda": 1.0,
            "construction": "local",
            "symplectify": {"t_name": "t", "t_box": [-1.0, 1.0], "lambda": 1.0},
        },
        "samples": {
            "seed": 42,
            "jitter": 0.01,
            "base_grid": {"c": [1024]},
            "tube_grid": {"c": [33, 9]},
            "dc_grid": {"c": [40, 5]},
            "cr_seed_grid": {"c": [32, 4]},
            "product_grid": {"c": [33, 33]},
        },
        "checks": [
            "contact",
            "dc_consistency",
            "extension_pullback",
            "rho_vanishes",
            "spsh",
            "symplectify",
            "cr_levi",
        ],
    }


_BUILDERS = {
    "E1_R3_standard": _e1,
    "E2_circle": _e2,
    "E3_T3": _e3,
    "E4_heisenberg_translation": _e4,
    "E5_Z2_stratified": _e5,
    "E6_S1_on_S3": _e6,
    "E7_symplectification_line": _e7,
}

BUILTIN_NAMES = tuple(_BUILDERS)


def builtin_dict(name: str) -> dict:
    if name not in _BUILDERS:
        raise ScenarioError(f"unknown builtin scenario '{name}' (known: {', '.join(BUILTIN_NAMES)})")
    return _BUILDERS[name]()


def builtin(name: str) -> Scenario:
    return load_dict(builtin_dict(name))
