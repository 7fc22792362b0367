"""Explicit bump-localised helical solutions, grid sampling, energy and screwline geometry."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import calculus as calc
from .calculus import XI, X, Y, Z, ScalarField
from .quadrature import QuadratureResult, integrate_with_error, nodes

PHASE_FAMILIES = ("psi1", "psi2")


class TruncationError(ValueError):
    def __init__(self, message, suggested_box):
        super().__init__(message)
        self.suggested_box = suggested_box


@dataclass(frozen=True)
class PhLOConfig:
    eps: int = -1
    kappa: int = 1
    l0: float = 0.25
    r0: float = 0.5
    a: float = 1.0
    b: float = 1.0
    gamma: float = 1.0
    phase_family: str = "psi1"
    phi0: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.eps not in (-1, 1) or self.kappa not in (-1, 1):
            raise ValueError("epsilon and kappa must be +1 or -1")
        for name in ("l0", "r0", "gamma", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")
        for name in ("a", "b", "phi0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.phase_family not in PHASE_FAMILIES:
            raise ValueError(f"phase_family must be one of {PHASE_FAMILIES}")

    @property
    def lam(self) -> float:
        return 4.0 * self.l0

    def with_(self, **kw) -> "PhLOConfig":
        return replace(self, **kw)

    def support_box(self, t: float | None = None):
        """(x, y, z) ranges containing the support at time t, or for every t in [0, lambda/c]."""
        lam = self.lam
        xr = (self.a - self.r0, self.a + self.r0)
        yr = (self.b - self.r0, self.b + self.r0)
        if t is None:
            zr = (-lam, lam)
        else:
            # support in z: 0 < c t + eps z < lambda
            ends = sorted((self.eps * (0.0 - self.c * t), self.eps * (lam - self.c * t)))
            zr = (ends[0], ends[1])
        return xr, yr, zr


@dataclass
class SolutionFields:
    u: ScalarField
    p: ScalarField
    Phi: ScalarField  # amplitude Phi0(x, y) theta(xi + eps z)
    psi: ScalarField  # unwrapped phase
    config: PhLOConfig


def build_solution(config: PhLOConfig) -> SolutionFields:
    cfg = config
    q = ((X - cfg.a) ** 2 + (Y - cfg.b) ** 2) / (cfg.r0**2)
    Phi0 = cfg.gamma * calc.radial_bump(q)  # gamma * bump(distance / r0)
    s = XI + cfg.eps * Z
    theta = calc.bump((2.0 * s - cfg.lam) / cfg.lam)
    Phi = Phi0 * theta
    if cfg.phase_family == "psi1":
        psi = (-cfg.eps * cfg.kappa / cfg.l0) * Z + cfg.phi0
    else:
        psi = (cfg.kappa / cfg.l0) * XI + cfg.phi0
    return SolutionFields(Phi * calc.cos(psi), Phi * calc.sin(psi), Phi, psi, cfg)


# ---------------------------------------------------------------- sampling

CSV_HEADER = ("x", "y", "z", "t", "u", "p", "phi", "psi", "energy_density")


@dataclass
class GridSpec:
    x: tuple
    y: tuple
    z: tuple
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for n in (self.nx, self.ny, self.nz):
            if int(n) <= 0:
                raise ValueError("axis counts must be positive")
        for lo, hi in (self.x, self.y, self.z):
            if not hi > lo:
                raise ValueError("empty range")


@dataclass
class SampledGrid:
    spec: GridSpec
    t: float
    points: np.ndarray  # (n, 3) node centres, row-major with z fastest
    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    energy_density: np.ndarray

    def __len__(self):
        return len(self.u)

    def rows(self):
        for i in range(len(self.u)):
            x, y, z = self.points[i]
            yield (x, y, z, self.t, self.u[i], self.p[i], self.phi[i], self.psi[i], self.energy_density[i])

    def write_csv(self, path_or_file):
        def fmt(v):
            return format(float(v), ".17g")

        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in self.rows():
                w.writerow([fmt(v) for v in row])
        finally:
            if own:
                fh.close()


def sample(sol, spec: GridSpec, t: float = 0.0, c: float = 1.0, threads=None) -> SampledGrid:
    """Values at node centres; ``sol`` is a SolutionFields or a (u, p) pair."""
    u, p = (sol.u, sol.p) if isinstance(sol, SolutionFields) else sol
    xs = nodes(*spec.x, spec.nx)
    ys = nodes(*spec.y, spec.ny)
    zs = nodes(*spec.z, spec.nz)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts3 = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    pts = np.concatenate([pts3, np.full((len(pts3), 1), c * t)], axis=1)
    vals = calc.evaluate_chunked({"u": u, "p": p}, pts, threads=threads)
    uu, pp = vals["u"], vals["p"]
    e = uu * uu + pp * pp
    return SampledGrid(spec, float(t), pts3, uu, pp, np.sqrt(e), np.arctan2(pp, uu), e)


# ---------------------------------------------------------------- energy


@dataclass
class EnergyResult:
    value: float
    error: float
    coarse: float
    box: tuple
    counts: tuple
    t: float

    @property
    def relative_error(self) -> float:
        return self.error / abs(self.value) if self.value else 0.0


def _boundary_max(f2, box, xi, n=24):
    """Largest |f2| over the six faces of the box at fixed xi."""
    worst = 0.0
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    for k in range(3):
        for side in (0, 1):
            grids = [axes[i] if i != k else np.array([box[k][side]]) for i in range(3)]
            g = np.meshgrid(*grids, indexing="ij")
            pts = np.stack([a.ravel() for a in g] + [np.full(g[0].size, xi)], axis=1)
            worst = max(worst, float(np.max(np.abs(calc.evaluate(f2, pts)))))
    return worst


def _interior_max(f2, box, xi, n=24):
    axes = [nodes(lo, hi, n) for lo, hi in box]
    g = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in g] + [np.full(g[0].size, xi)], axis=1)
    return float(np.max(np.abs(calc.evaluate(f2, pts))))


def check_support(f2, box, xi, rel: float = 1e-12):
    edge = _boundary_max(f2, box, xi)
    peak = _interior_max(f2, box, xi)
    if edge > rel * max(peak, 1e-300) and edge > 0:
        grown = tuple(((lo + hi) / 2 - (hi - lo), (lo + hi) / 2 + (hi - lo)) for lo, hi in box)
        raise TruncationError(
            f"support truncated by box {box}: boundary value {edge:.3e} vs peak {peak:.3e}; try box {grown}",
            grown,
        )


def energy(sol, box=None, counts=(64, 64, 64), t: float = 0.0, c: float = 1.0, threads=None) -> EnergyResult:
    """Integral of Phi^2 over a box at time t (midpoint rule, Richardson estimate)."""
    if isinstance(sol, SolutionFields):
        u, p = sol.u, sol.p
        if box is None:
            box = sol.config.support_box(t)
        c = sol.config.c
    else:
        u, p = sol
    if box is None:
        raise ValueError("a box is required for general fields")
    f2 = u * u + p * p
    xi = c * t
    check_support(f2, box, xi)
    res: QuadratureResult = integrate_with_error(f2, [box[0], box[1], box[2], xi], list(counts), threads)
    return EnergyResult(res.value, res.error, res.coarse, tuple(box), tuple(counts), float(t))


# ---------------------------------------------------------------- screwline


@dataclass
class ScrewlineReport:
    R: float
    b: float
    K: float
    T: float
    nu: float
    period: float
    phase_rate_l0: float  # 1/l0, from the psi1 phase
    phase_rate_turn: float  # 2 pi / lambda, one turn per wavelength
    inside_disk: bool
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "R", "b", "K", "T", "nu", "period", "phase_rate_l0", "phase_rate_turn", "inside_disk"
        )} | {"warnings": list(self.warnings)}


def screwline(config: PhLOConfig, x: float, y: float) -> ScrewlineReport:
    R = math.hypot(x, y)
    b = config.lam / (2 * math.pi)
    den = R * R + b * b
    inside = math.hypot(x - config.a, y - config.b) < config.r0
    notes = []
    if not inside:
        msg = f"point ({x}, {y}) lies outside the disk of radius {config.r0} about ({config.a}, {config.b})"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    nu = config.c / config.lam  # = c / (2 pi b)
    return ScrewlineReport(
        R=R,
        b=b,
        K=R / den,
        T=config.kappa * b / den,
        nu=nu,
        period=1.0 / nu,
        phase_rate_l0=1.0 / config.l0,
        phase_rate_turn=2 * math.pi / config.lam,
        inside_disk=inside,
        warnings=notes,
    )
