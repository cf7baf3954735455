"""Deterministic sample lattices with seeded jitter.

All checks draw their points from here so that a (scenario, seed) pair fixes
every residual bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from .geometry import TWO_PI, Chart


def axis_lattice(lo: float, hi: float, n: int, periodic: bool) -> np.ndarray:
    """Cell centers: periodic axes cover [lo, lo+2pi) evenly, others the open box.

    n = 1 collapses the axis to its center (used to pin level-set parameters).
    """
    n = max(int(n), 1)
    if periodic:
        return lo + TWO_PI * (np.arange(n) + 0.5) / n
    span = hi - lo
    return lo + span * (np.arange(n) + 0.5) / n


def lattice(ch: Chart, resolution, jitter: float = 0.0, seed: int = 42, margin: float = 0.0) -> np.ndarray:
    """Product lattice over a chart box, optionally jittered and shrunk by ``margin``.

    margin in [0, 0.5): fraction of each non-periodic half-width kept away from
    the boundary (Newton seeds and tube samples need interior room).
    """
    if isinstance(resolution, int):
        resolution = (resolution,) * ch.dim
    axes = []
    for i in range(ch.dim):
        lo, hi = ch.lo[i], ch.hi[i]
        if not ch.periodic[i] and margin > 0.0:
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            lo, hi = mid - (1.0 - margin) * half, mid + (1.0 - margin) * half
        axes.append(axis_lattice(lo, hi, resolution[i], ch.periodic[i]))
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        for i in range(ch.dim):
            step = axes[i][1] - axes[i][0] if len(axes[i]) > 1 else (ch.hi[i] - ch.lo[i])
            X[:, i] += rng.uniform(-jitter, jitter, size=X.shape[0]) * step
        X = ch.reduce(X)
    return X


def inclusive_lattice(ch: Chart, resolution) -> np.ndarray:
    """Endpoint-inclusive unjittered lattice (stratification needs exact axes)."""
    if isinstance(resolution, int):
        resolution = (resolution,) * ch.dim
    axes = []
    for i in range(ch.dim):
        if ch.periodic[i]:
            axes.append(axis_lattice(ch.lo[i], ch.hi[i], resolution[i], True))
        else:
            axes.append(np.linspace(ch.lo[i], ch.hi[i], max(int(resolution[i]), 2)))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def scale_resolution(resolution, factor: float, keep_odd: bool = False):
    """CLI --samples scaling; resolutions never drop below 2 (odd keeps axes)."""
    out = []
    for r in resolution:
        s = max(2, int(round(r * factor))) if factor != 1.0 else int(r)
        if keep_odd and s % 2 == 0:
            s += 1
        out.append(s)
    return tuple(out)
