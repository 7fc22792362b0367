"""Shared fixtures-by-function for the unit tests."""

import numpy as np

from phlo import calculus as calc
from phlo import dsl
from phlo.config import default_config
from phlo.report import suite_probes
from phlo.solutions import build_solution

RANDOM_PAIRS = [
    ("sin(x*y) + 0.3*z*xi", "exp(-(x^2+z^2)/4)*cos(xi - y)", 1),
    ("bump((x + xi)/5)*atan2(y, 3 + z^2)", "0.5*x - y*z + cos(xi)", -1),
    ("x^2 - xi*z/3", "sin(x + y + z + xi)", 1),
]


def random_fields():
    return [(dsl.field(u), dsl.field(p), eps) for u, p, eps in RANDOM_PAIRS]


def solution(**overrides):
    cfg = default_config()
    if overrides:
        cfg.solution = cfg.solution.with_(**overrides)
    return cfg, build_solution(cfg.solution)


def support_points(cfg, sol, n=2000, seed=0, rel=1e-3):
    pts = suite_probes(cfg, n, seed)
    phi = calc.evaluate(sol.Phi, pts)
    return pts[phi > rel * phi.max()]


def mx(obj, pts):
    with np.errstate(all="ignore"):
        return calc.max_abs(calc.evaluate(obj, pts))
