#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure jet kernels.

Times value / gradient / Hessian evaluation of three representative tapes:
a small closed-form coefficient, a mid-size extension potential, and the
large averaged two-chart sphere potential from the catalog.

Usage: python benchmarks/bench_backends.py [--points N]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from contactcx.expr import parse
from contactcx.expr.tape import MODE_GRAD, MODE_HESS, MODE_VAL, compile_tape
from contactcx.kernels import pyjet

try:
    from contactcx.kernels import _cyjet as cyjet
except ImportError:
    cyjet = None


def _sphere_potential_tape():
    """The chart-n representation of the averaged E6 potential (many terms fused)."""
    from contactcx.scenarios import builtin
    from contactcx.scenarios.runner import RunContext, construct

    ctx = RunContext(scenario=builtin("E6_S1_on_S3"), seed=42, scale=1.0)
    construct(ctx)
    terms = ctx.rho.terms["n"]
    acc = terms[0].expr
    for t in terms[1:]:
        acc = acc + t.expr  # guards dropped: benchmark the raw arithmetic only
    return compile_tape(acc), ctx


CASES = [
    ("coefficient (rational, 3 vars)", lambda: compile_tape(
        parse("(2.0*u3^2 - 2.0*u1^2 - 2.0*u2^2 + 2.0)/(1.0 + u1^2 + u2^2 + u3^2)^2", ("u1", "u2", "u3"))
    )),
    ("extension potential (6 vars)", lambda: compile_tape(
        parse(
            "cos(z)*x_im + sin(z)*y_im + x_im^2 + y_im^2 + z_im^2",
            ("x", "y", "z", "x_im", "y_im", "z_im"),
        )
    )),
]


def bench(tape, X, mode, impl, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.evaluate(tape, X, mode, True)
        best = min(best, time.perf_counter() - t0)
    return X.shape[0] / best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--sphere", action="store_true", help="include the large catalog potential (slower)")
    args = ap.parse_args()

    cases = list(CASES)
    sphere_ctx = None
    if args.sphere:
        tape, sphere_ctx = _sphere_potential_tape()
        cases.append((f"averaged sphere potential ({len(tape)} ops)", lambda t=tape: t))

    rng = np.random.default_rng(0)
    impls = [("pure", pyjet)] + ([("compiled", cyjet)] if cyjet is not None else [])
    header = f"{'tape':40s} {'mode':5s}" + "".join(f" {name:>12s}" for name, _ in impls) + "   speedup"
    print(header)
    print("-" * len(header))
    for label, make in cases:
        tape = make()
        n = tape.n_vars
        X = rng.uniform(-0.05, 0.05, size=(args.points, n)) + 0.5
        for mode, mname in ((MODE_VAL, "val"), (MODE_GRAD, "grad"), (MODE_HESS, "hess")):
            rates = [bench(tape, X, mode, impl) for _, impl in impls]
            row = f"{label:40s} {mname:5s}" + "".join(f" {r:>9.0f}/s" for r in rates)
            if len(rates) == 2 and rates[0] > 0:
                row += f"   {rates[1] / rates[0]:6.1f}x"
            print(row)
    print(f"\n({args.points} points per timing, best of 3)")


if __name__ == "__main__":
    main()
