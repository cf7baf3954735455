"""Command-line front end: verify scenarios, list and describe the catalog.

Exit codes: 0 all checks pass, 1 any check fails, 2 configuration/IO errors.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, backend_name
from .errors import ContactcxError
from .scenarios import BUILTIN_NAMES, builtin, load, run


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="contactcx",
        description="Residual verification for complexified contact geometry scenarios.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend_name()} kernel)")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("verify", help="run a scenario's checks and emit a report")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="builtin scenario name (see 'list')")
    src.add_argument("--scenario", help="path to a scenario JSON file")
    v.add_argument("--format", choices=("json", "text"), default="text")
    v.add_argument("--report", help="write the report here instead of stdout")
    v.add_argument("--samples", type=float, default=1.0, help="lattice resolution scale factor")
    v.add_argument("--seed", type=int, default=None, help="override the scenario's sample seed")
    v.add_argument("--workers", type=int, default=None, help="worker threads (1 = fully serial)")
    v.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="CHECK=VALUE",
        help="tolerance override, repeatable",
    )

    sub.add_parser("list", help="list builtin scenario names")

    d = sub.add_parser("describe", help="print a scenario as JSON")
    dsrc = d.add_mutually_exclusive_group(required=True)
    dsrc.add_argument("--builtin", help="builtin scenario name")
    dsrc.add_argument("--scenario", help="path to a scenario JSON file")
    return p


def _load_scenario(args):
    if getattr(args, "builtin", None):
        return builtin(args.builtin)
    return load(args.scenario)


def _parse_tols(entries):
    out = {}
    for e in entries:
        if "=" not in e:
            raise ContactcxError(f"bad --tol entry '{e}', expected CHECK=VALUE")
        k, v = e.split("=", 1)
        out[k.strip()] = float(v)
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "list":
            for name in BUILTIN_NAMES:
                print(name)
            return 0
        if args.command == "describe":
            scn = _load_scenario(args)
            print(scn.to_json())
            return 0
        scn = _load_scenario(args)
        report = run(
            scn,
            seed=args.seed,
            samples_scale=args.samples,
            workers=args.workers,
            tolerances=_parse_tols(args.tol),
        )
        text = report.to_json() if args.format == "json" else report.to_text()
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0 if report.verdict == "pass" else 1
    except ContactcxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
