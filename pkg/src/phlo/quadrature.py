"""Midpoint-rule quadrature over boxes in (x, y, z, xi), with Richardson estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import calculus as calc


def nodes(lo: float, hi: float, n: int) -> np.ndarray:
    if n <= 0:
        raise ValueError("axis count must be positive")
    if not hi > lo:
        raise ValueError("empty range")
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def _slice_points(axes, k):
    """Points of a product grid with the last varying axis fixed at its k-th node."""
    *rest, last = axes
    grids = np.meshgrid(*rest, indexing="ij")
    pts = [g.ravel() for g in grids]
    pts.append(np.full(pts[0].shape, last[k]))
    return pts


def integrate(field, ranges, counts, threads=None) -> float:
    """Midpoint integral of ``field`` over a box.

    ``ranges`` has one entry per coordinate: a (lo, hi) pair to integrate over
    or a float to hold fixed.  ``counts`` gives cell counts for the integrated
    axes, in order.  Slices along the last integrated axis are summed with
    ``math.fsum`` so the result does not depend on thread count.
    """
    spans = [i for i, r in enumerate(ranges) if not isinstance(r, (int, float))]
    if len(counts) != len(spans):
        raise ValueError("one count per integrated axis")
    axes = [nodes(ranges[i][0], ranges[i][1], n) for i, n in zip(spans, counts)]
    cell = math.prod((ranges[i][1] - ranges[i][0]) / n for i, n in zip(spans, counts))
    fixed = {i: float(r) for i, r in enumerate(ranges) if isinstance(r, (int, float))}

    def one(k):
        varying = _slice_points(axes, k)
        cols = []
        it = iter(varying)
        for i in range(4):
            cols.append(np.full(varying[0].shape, fixed[i]) if i in fixed else next(it))
        vals = calc.evaluate(field, np.stack(cols, axis=1))
        return float(np.sum(vals))

    sums = calc.parallel_map(one, range(len(axes[-1])), threads)
    return math.fsum(sums) * cell


@dataclass
class QuadratureResult:
    value: float
    coarse: float
    error: float  # Richardson estimate |fine - coarse| / 3

    @property
    def relative_error(self) -> float:
        return self.error / abs(self.value) if self.value != 0 else 0.0


def integrate_with_error(field, ranges, counts, threads=None) -> QuadratureResult:
    """Midpoint integral plus the estimate from a half-resolution run."""
    if any(n < 2 for n in counts):
        raise ValueError("Richardson estimate needs at least 2 cells per axis")
    fine = integrate(field, ranges, counts, threads)
    coarse = integrate(field, ranges, [max(1, n // 2) for n in counts], threads)
    return QuadratureResult(fine, coarse, abs(fine - coarse) / 3.0)
