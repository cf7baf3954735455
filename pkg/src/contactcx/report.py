"""Verification reports: fixed-order JSON schema and a text rendering.

JSON schema (field order is fixed so diffs stay stable):
{"scenario": str, "verdict": "pass"|"fail",
 "checks": [{"id", "residual", "tolerance", "status", "samples", "ms"}],
 "seed": int, "version": str}

Residual semantics depend on the check: identity checks report a maximum
residual compared as residual < tolerance; minimum-type checks (contact, spsh,
cr_levi, perturbation, kappa_rank) report the measured minimum compared as
residual > tolerance.  Timing (ms) varies run to run; every other field is
deterministic for a fixed (scenario, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    id: str
    residual: float
    tolerance: float
    status: str  # pass | fail | skipped
    samples: int
    ms: float
    note: str = ""  # text output only; not part of the JSON schema


@dataclass
class VerificationReport:
    scenario: str
    checks: list = field(default_factory=list)
    seed: int = 42
    version: str = "0.1.0"

    @property
    def verdict(self) -> str:
        return "pass" if all(c.status != "fail" for c in self.checks) else "fail"

    def to_dict(self) -> dict:
        def _num(x):
            # skipped/errored checks carry NaN; strict JSON has no NaN literal
            return x if x == x and abs(x) != float("inf") else None

        return {
            "scenario": self.scenario,
            "verdict": self.verdict,
            "checks": [
                {
                    "id": c.id,
                    "residual": _num(c.residual),
                    "tolerance": c.tolerance,
                    "status": c.status,
                    "samples": c.samples,
                    "ms": c.ms,
                }
                for c in self.checks
            ],
            "seed": self.seed,
            "version": self.version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario} (seed {self.seed})"]
        for c in self.checks:
            cmp = ">" if c.id in MIN_TYPE_CHECKS else "<"
            extra = f"  [{c.note}]" if c.note else ""
            lines.append(
                f"  {c.status.upper():7s} {c.id:22s} residual={c.residual:.3e} "
                f"({cmp} {c.tolerance:.1e} required) samples={c.samples} ms={c.ms:.1f}{extra}"
            )
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


MIN_TYPE_CHECKS = frozenset({"contact", "spsh", "cr_levi", "perturbation", "kappa_rank"})
