"""Deterministic probe sets (scrambled Halton points in a box)."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

DEFAULT_BOX = ((-2.0, 2.0),) * 4


def probe_points(n: int = 1000, box=DEFAULT_BOX, seed: int = 0) -> np.ndarray:
    """``n`` low-discrepancy points in ``box`` (one (lo, hi) pair per axis)."""
    if n <= 0:
        raise ValueError("probe count must be positive")
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    sample = qmc.Halton(d=len(box), scramble=True, seed=seed).random(n)
    return lo + sample * (hi - lo)
