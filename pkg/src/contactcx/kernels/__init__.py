"""Kernel backend selection.

The compiled extension (`_cyjet`) is preferred when importable; the numpy
tape evaluator is the fallback.  Set CONTACTCX_BACKEND=pure|compiled to force
one (forcing `compiled` raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import pyjet

_forced = os.environ.get("CONTACTCX_BACKEND", "").strip().lower()

if _forced == "pure":
    BACKEND = "pure"
    _impl = pyjet
else:
    try:
        from . import _cyjet as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        BACKEND = "pure"
        _impl = pyjet


def evaluate(tape, X, mode=2, strict=True):
    return _impl.evaluate(tape, X, mode, strict)


def backend_name() -> str:
    return BACKEND
