"""Command-line interface: ``phlo verify | curvature | energy | planck | emit | parse-check``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import calculus as calc
from . import connections as cn
from . import dsl
from .config import ConfigError, RunConfig, default_config, load_config
from .exterior import coordinate_vector
from .probes import probe_points

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(args) -> RunConfig:
    return load_config(args.config) if args.config else default_config()


def _grid(text, n, least=2):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad grid {text!r}: expected {n} comma-separated integers") from None
    if len(vals) != n or any(v < least for v in vals):
        raise UsageError(f"bad grid {text!r}: expected {n} integers >= {least}")
    return vals


def _fmt(v) -> str:
    return f"{v:.9e}" if isinstance(v, float) else str(v)


def _dump(pairs, fmt, out):
    if fmt == "machine":
        out.write(json.dumps({k: v for k, v in pairs}, indent=2) + "\n")
    else:
        width = max(len(k) for k, _ in pairs)
        for k, v in pairs:
            out.write(f"{k.ljust(width)}  {_fmt(v)}\n")


# ---------------------------------------------------------------- commands


def cmd_verify(args, out) -> int:
    from .report import run_suite

    cfg = _load(args)
    provider = args.provider or cfg.provider
    h = args.fd_step if args.fd_step is not None else cfg.fd_step
    if not h > 0:
        raise UsageError("--fd-step must be positive")
    cfg.fd_step = h
    rep = run_suite(
        cfg,
        provider=provider,
        seed=args.seed,
        probes=args.probes,
        planck=not args.skip_planck,
        threads=args.threads,
    )
    out.write(rep.to_json() if args.format == "machine" else rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _stats(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"min": None, "max": None, "mean": None}
    return {"min": float(v.min()) + 0.0, "max": float(v.max()) + 0.0, "mean": float(v.mean()) + 0.0}


def cmd_curvature(args, out) -> int:
    eps = args.epsilon
    u = dsl.ExprField(args.u, {"eps": eps})
    p = dsl.ExprField(args.p, {"eps": eps})
    pts = probe_points(args.probes, seed=args.seed)
    cf = cn.curvature_closed_form(u, p, eps)
    with np.errstate(all="ignore"):
        vals = calc.evaluate_chunked({"Z1": cf.Z1, "Z2": cf.Z2, "K2": cf.K2}, pts, threads=args.threads)
        summ = cn.l0_summary(u, p, eps, pts)
    P = cn.build_projections(u, p, eps)
    horizontal = cn.frobenius_report([P["H"].tensor.column(2), P["H"].tensor.column(3)], pts)
    vertical = cn.frobenius_report([coordinate_vector(0), coordinate_vector(1)], pts)
    defined = summ.support & summ.defined
    if summ.is_undefined or not defined.any():
        l0 = {"status": "undefined (plane-wave degenerate)"}
    else:
        l0 = {
            "status": "defined" if summ.defined[summ.support].all() else "partly undefined (plane-wave degenerate)",
            "min": summ.minimum,
            "max": summ.maximum,
            "median": summ.median,
            "undefined_probes": int((summ.support & ~summ.defined).sum()),
        }
    report = {
        "u": u.source,
        "p": p.source,
        "epsilon": eps,
        "probes": len(pts),
        "Z1": {ax: _stats(vals["Z1"][i]) for i, ax in enumerate(("x", "y"))},
        "Z2": {ax: _stats(vals["Z2"][i]) for i, ax in enumerate(("x", "y"))},
        "K2": _stats(vals["K2"]),
        "l0": l0,
        "horizontal_distribution": horizontal.to_dict(),
        "vertical_distribution": vertical.to_dict(),
    }
    if args.format == "machine":
        out.write(json.dumps(report, indent=2) + "\n")
        return EXIT_OK

    def s3(d):
        if d["min"] is None:
            return "undefined"
        return f"min {d['min']:+.6e}  max {d['max']:+.6e}  mean {d['mean']:+.6e}"

    out.write(f"u = {u.source}\np = {p.source}\nepsilon = {eps}\nprobes = {len(pts)}\n")
    for name in ("Z1", "Z2"):
        for ax in ("x", "y"):
            out.write(f"{name}.{ax}: {s3(report[name][ax])}\n")
    out.write(f"K^2: {s3(report['K2'])}\n")
    if "min" in l0:
        out.write(f"l0: {l0['status']}; min {l0['min']:.9e} max {l0['max']:.9e} median {l0['median']:.9e}\n")
    else:
        out.write(f"l0: {l0['status']}\n")
    out.write("horizontal distribution (H d_z, H d_xi):\n")
    out.write("  " + horizontal.to_text().replace("\n", "\n  ") + "\n")
    out.write("vertical distribution (d_x, d_y):\n")
    out.write("  " + vertical.to_text().replace("\n", "\n  ") + "\n")
    return EXIT_OK


def _run_fields(cfg):
    from .report import suite_fields

    u, p, _ = suite_fields(cfg)
    return u, p


def cmd_energy(args, out) -> int:
    from .solutions import energy

    cfg = _load(args)
    counts = _grid(args.grid, 3) if args.grid else [cfg.nx, cfg.ny, cfg.nz]
    s = cfg.solution
    box = cfg.box if cfg.box is not None else s.support_box(args.t)
    res = energy(_run_fields(cfg), box=box, counts=counts, t=args.t, c=s.c, threads=args.threads)
    T = s.lam / s.c
    pairs = [
        ("t", float(args.t)),
        ("E", res.value),
        ("richardson_error", res.error),
        ("richardson_relative", res.relative_error),
        ("T", T),
        ("nu", 1.0 / T),
        ("h", res.value * T),
        ("grid", ",".join(str(c) for c in counts)),
    ]
    _dump(pairs, args.format, out)
    return EXIT_OK


def cmd_planck(args, out) -> int:
    from .model import planck_action

    cfg = _load(args)
    if args.grid:
        parts = args.grid.split(",")
        counts = _grid(args.grid, 4 if len(parts) == 4 else 3)
        if len(counts) == 3:
            counts.append(counts[2])
    else:
        counts = [cfg.nx, cfg.ny, cfg.nz, cfg.nz]
    s = cfg.solution
    rep = planck_action(s, tuple(counts), box=cfg.box, fields=_run_fields(cfg), threads=args.threads)
    pairs = [
        ("E", rep.E),
        ("T", rep.T),
        ("h", rep.h),
        ("nu", rep.nu),
        ("H", rep.H),
        ("eps_kappa_E_T", rep.expected),
        ("mismatch", rep.mismatch),
        ("richardson_relative", rep.richardson_relative),
        ("grid", ",".join(str(c) for c in counts)),
    ]
    _dump(pairs, args.format, out)
    for w in rep.warnings:
        sys.stderr.write(f"warning: {w}\n")
    ok = rep.mismatch <= 0.01 and rep.richardson_relative <= 0.01
    return EXIT_OK if ok else EXIT_FAIL


def cmd_emit(args, out) -> int:
    from .solutions import GridSpec, sample

    cfg = _load(args)
    counts = _grid(args.grid, 3, least=1) if args.grid else [cfg.nx, cfg.ny, cfg.nz]
    s = cfg.solution
    # a fixed box (the one-period envelope) so emissions at different t share nodes
    box = cfg.box if cfg.box is not None else s.support_box()
    spec = GridSpec(box[0], box[1], box[2], *counts)
    grid = sample(_run_fields(cfg), spec, t=args.t, c=s.c, threads=args.threads)
    try:
        grid.write_csv(args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    out.write(f"wrote {len(grid)} rows to {args.out}\n")
    return EXIT_OK


def cmd_parse_check(args, out) -> int:
    expr = dsl.parse(args.expr)
    out.write(dsl.to_string(expr) + "\n")
    if args.at:
        try:
            pt = [float(v) for v in args.at.split(",")]
        except ValueError:
            raise UsageError("--at expects x,y,z,xi") from None
        if len(pt) != 4:
            raise UsageError("--at expects x,y,z,xi")
        params = {}
        for item in args.param or []:
            k, _, v = item.partition("=")
            try:
                params[k.strip()] = float(v)
            except ValueError:
                raise UsageError(f"bad --param {item!r}") from None
        val = dsl.evaluate(expr, pt, params)
        out.write(f"value: {val!r}\n")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phlo", description="Verify and explore photon-like field configurations.")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: PHLO_THREADS or CPU count)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="key = value config file (default: shipped default)")
        sp.add_argument("--format", choices=("text", "machine"), default="text")
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    v = sub.add_parser("verify", help="run the invariant suite")
    common(v)
    v.add_argument("--provider", choices=("dual", "fd"))
    v.add_argument("--fd-step", type=float)
    v.add_argument("--seed", type=int)
    v.add_argument("--probes", type=int)
    v.add_argument("--skip-planck", action="store_true", help="skip the quadrature stage")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("curvature", help="curvature, K^2, l0 and integrability for DSL fields")
    common(c, config=False)
    c.add_argument("--u", required=True)
    c.add_argument("--p", required=True)
    c.add_argument("--epsilon", type=int, choices=(-1, 1), default=1)
    c.add_argument("--probes", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_curvature)

    e = sub.add_parser("energy", help="integral energy at time t")
    common(e)
    e.add_argument("--grid", help="NX,NY,NZ")
    e.add_argument("--t", type=float, default=0.0)
    e.set_defaults(func=cmd_energy)

    pl = sub.add_parser("planck", help="4-volume action versus eps*kappa*E*T")
    common(pl)
    pl.add_argument("--grid", help="NX,NY,NZ or NX,NY,NZ,NXI")
    pl.set_defaults(func=cmd_planck)

    em = sub.add_parser("emit", help="write sampled fields as CSV")
    common(em)
    em.add_argument("--t", type=float, default=0.0)
    em.add_argument("--out", required=True)
    em.add_argument("--grid", help="NX,NY,NZ")
    em.set_defaults(func=cmd_emit)

    pc = sub.add_parser("parse-check", help="parse a DSL expression and optionally evaluate it")
    pc.add_argument("expr")
    pc.add_argument("--at", help="x,y,z,xi")
    pc.add_argument("--param", action="append", help="constant binding NAME=VALUE")
    pc.set_defaults(func=cmd_parse_check)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            sys.stderr.write("error: --threads must be positive\n")
            return EXIT_USAGE
        os.environ["PHLO_THREADS"] = str(args.threads)
    else:
        args.threads = None
    from .solutions import TruncationError
    from .report import StageError

    try:
        return args.func(args, out)
    except dsl.ParseError as exc:
        src = getattr(args, "expr", None)
        sys.stderr.write(f"parse error: {exc}\n")
        if src is not None:
            sys.stderr.write(f"  {src}\n  {' ' * _char_col(src, exc.offset)}^\n")
        return EXIT_USAGE
    except (ConfigError, UsageError, dsl.EvaluationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except TruncationError as exc:
        box = "; ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in exc.suggested_box)
        sys.stderr.write(f"error: {exc}\nsuggested box: {box}\n")
        return EXIT_FAIL
    except StageError as exc:
        if isinstance(exc.cause, (dsl.ParseError, dsl.EvaluationError)):
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_USAGE
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


def _char_col(text: str, byte_offset: int) -> int:
    return len(text.encode("utf-8")[:byte_offset].decode("utf-8", errors="ignore"))


if __name__ == "__main__":
    sys.exit(main())
