"""Exterior calculus on Minkowski space and numerical checks of photon-like field configurations."""

from .calculus import DUAL, DualProvider, FiniteDifference, ScalarField, evaluate
from .config import RunConfig, default_config, load_config, parse_config
from .connections import build_projections, curvature_closed_form, frobenius_report, l0_field
from .dsl import ExprField, ParseError, field, parse
from .exterior import Form, Tensor11, Vector, hodge, interior, wedge
from .model import build_phlo, planck_action
from .report import run_suite
from .solutions import PhLOConfig, build_solution, energy, sample, screwline

__version__ = "0.1.0"

__all__ = [
    "DUAL",
    "DualProvider",
    "ExprField",
    "FiniteDifference",
    "Form",
    "ParseError",
    "PhLOConfig",
    "RunConfig",
    "ScalarField",
    "Tensor11",
    "Vector",
    "build_phlo",
    "build_projections",
    "build_solution",
    "curvature_closed_form",
    "default_config",
    "energy",
    "evaluate",
    "field",
    "frobenius_report",
    "hodge",
    "interior",
    "l0_field",
    "load_config",
    "parse",
    "parse_config",
    "planck_action",
    "run_suite",
    "sample",
    "screwline",
    "wedge",
]
