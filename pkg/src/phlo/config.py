"""Flat ``key = value`` configuration files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from .solutions import PHASE_FAMILIES, PhLOConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    solution: PhLOConfig = field(default_factory=PhLOConfig)
    nx: int = 64
    ny: int = 64
    nz: int = 64
    box: tuple | None = None  # ((xmin, xmax), (ymin, ymax), (zmin, zmax)); None = support-fitted
    provider: str = "dual"
    fd_step: float = 1e-5
    seed: int = 0
    probes: int = 1000
    u_expr: str | None = None
    p_expr: str | None = None

    def echo(self) -> list:
        """(key, value) pairs in a fixed order, for reports."""
        s = self.solution
        out = [
            ("epsilon", s.eps),
            ("kappa", s.kappa),
            ("l0", s.l0),
            ("lambda", s.lam),
            ("r0", s.r0),
            ("a", s.a),
            ("b", s.b),
            ("gamma", s.gamma),
            ("phase_family", s.phase_family),
            ("phi0", s.phi0),
            ("c", s.c),
            ("grid", f"{self.nx},{self.ny},{self.nz}"),
        ]
        if self.box is not None:
            out.append(("box", ";".join(f"{lo!r},{hi!r}" for lo, hi in self.box)))
        if self.u_expr is not None:
            out.append(("u_expr", self.u_expr))
        if self.p_expr is not None:
            out.append(("p_expr", self.p_expr))
        return out


_SOLUTION_KEYS = {
    "epsilon": ("eps", int),
    "kappa": ("kappa", int),
    "l0": ("l0", float),
    "r0": ("r0", float),
    "a": ("a", float),
    "b": ("b", float),
    "gamma": ("gamma", float),
    "phase_family": ("phase_family", str),
    "phi0": ("phi0", float),
    "c": ("c", float),
}
_RUN_KEYS = {
    "grid.nx": ("nx", int),
    "grid.ny": ("ny", int),
    "grid.nz": ("nz", int),
    "provider": ("provider", str),
    "fd_step": ("fd_step", float),
    "seed": ("seed", int),
    "probes": ("probes", int),
    "u_expr": ("u_expr", str),
    "p_expr": ("p_expr", str),
}
_BOX_KEYS = ("box.xmin", "box.xmax", "box.ymin", "box.ymax", "box.zmin", "box.zmax")
KNOWN_KEYS = tuple(_SOLUTION_KEYS) + tuple(_RUN_KEYS) + _BOX_KEYS


def _convert(key, raw, kind, lineno):
    try:
        if kind is int:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {kind.__name__}, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    sol, run, box = {}, {}, {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (t.strip() for t in s.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key == "lambda":
            raise ConfigError(f"line {lineno}: lambda is derived as 4*l0 and cannot be set")
        if key in _SOLUTION_KEYS:
            name, kind = _SOLUTION_KEYS[key]
            sol[name] = _convert(key, raw, kind, lineno)
        elif key in _RUN_KEYS:
            name, kind = _RUN_KEYS[key]
            run[name] = _convert(key, raw, kind, lineno)
        elif key in _BOX_KEYS:
            box[key] = _convert(key, raw, float, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if "phase_family" in sol and sol["phase_family"] not in PHASE_FAMILIES:
        raise ConfigError(f"phase_family must be one of {', '.join(PHASE_FAMILIES)}")
    try:
        solution = PhLOConfig(**sol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if box and len(box) != len(_BOX_KEYS):
        missing = [k for k in _BOX_KEYS if k not in box]
        raise ConfigError(f"incomplete box: missing {', '.join(missing)}")
    if box:
        b = tuple((box[f"box.{ax}min"], box[f"box.{ax}max"]) for ax in "xyz")
        if any(not hi > lo for lo, hi in b):
            raise ConfigError("box ranges must satisfy min < max")
        run["box"] = b
    cfg = RunConfig(solution=solution, **run)
    for n in (cfg.nx, cfg.ny, cfg.nz):
        if n < 2:
            raise ConfigError("grid counts must be at least 2")
    if cfg.provider not in ("dual", "fd"):
        raise ConfigError("provider must be 'dual' or 'fd'")
    if not cfg.fd_step > 0:
        raise ConfigError("fd_step must be positive")
    if cfg.probes < 1:
        raise ConfigError("probes must be positive")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_config(text)


def default_config_text() -> str:
    return resources.files("phlo").joinpath("data/default.conf").read_text(encoding="utf-8")


def default_config() -> RunConfig:
    return parse_config(default_config_text())
