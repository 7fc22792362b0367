"""The verification suite: every identity of the model as a named, toleranced check."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import calculus as calc
from . import connections as cn
from . import model as m
from .calculus import provider_from_name
from .config import RunConfig
from .exterior import DIM, Tensor11, dx, evaluate_on, flux_contraction, hodge, wedge
from .probes import probe_points
from .solutions import TruncationError, build_solution, energy

STRUCTURAL = "structural"
DYNAMICAL = "dynamical"


@dataclass(frozen=True)
class Tolerances:
    """Single source of truth for suite tolerances."""

    structural: float = 1e-10
    dynamical_dual: float = 1e-8
    dynamical_fd: float = 1e-5
    route_fd: float = 1e-5  # structural identities that compare two derivative routes, under FD
    quadrature: float = 0.01
    conservation: float = 0.005
    l0_relative: float = 1e-6
    support_threshold: float = 1e-6
    support_threshold_fd: float = 1e-3  # FD error on bump tails grows like (log-derivative * h)^2

    def support(self, provider) -> float:
        return self.support_threshold_fd if isinstance(provider, calc.FiniteDifference) else self.support_threshold

    def l0(self, provider) -> float:
        return self.dynamical_fd if isinstance(provider, calc.FiniteDifference) else self.l0_relative

    def dynamical(self, provider) -> float:
        return self.dynamical_fd if isinstance(provider, calc.FiniteDifference) else self.dynamical_dual

    def route(self, provider) -> float:
        return self.route_fd if isinstance(provider, calc.FiniteDifference) else self.structural


TOLERANCES = Tolerances()


@dataclass
class InvariantResult:
    name: str
    kind: str
    residual: float
    tolerance: float
    probes: int
    passed: bool
    anchor: str
    note: str = ""
    stage: str = ""

    def to_dict(self) -> dict:
        r = self.residual
        return {
            "name": self.name,
            "stage": self.stage,
            "kind": self.kind,
            "residual": r if math.isfinite(r) else None,
            "tolerance": self.tolerance,
            "probes": self.probes,
            "passed": self.passed,
            "anchor": self.anchor,
            "note": self.note,
        }


@dataclass
class SuiteReport:
    results: list
    config: list
    provider: str
    fd_step: float
    seed: int
    probes: int
    fields: str
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> list:
        return [r for r in self.results if not r.passed]

    def by_name(self, name: str) -> InvariantResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        n_pass = sum(r.passed for r in self.results)
        return {
            "report": "phlo-verify",
            "version": 1,
            "provider": self.provider,
            "fd_step": self.fd_step,
            "seed": self.seed,
            "probes": self.probes,
            "fields": self.fields,
            "config": {k: v for k, v in self.config},
            "invariants": [r.to_dict() for r in self.results],
            "extras": self.extras,
            "summary": {"passed": n_pass, "failed": len(self.results) - n_pass, "all_passed": self.passed},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = ["PhLO verification report"]
        lines.append(f"provider: {self.provider}" + (f" (h={self.fd_step!r})" if self.provider == "fd" else ""))
        lines.append(f"seed: {self.seed}")
        lines.append(f"probes: {self.probes}")
        lines.append(f"fields: {self.fields}")
        lines.append("config: " + " ".join(f"{k}={v}" for k, v in self.config))
        stage = None
        for r in self.results:
            if r.stage != stage:
                stage = r.stage
                lines.append("")
                lines.append(f"== {stage}")
            flag = "PASS" if r.passed else "FAIL"
            res = f"{r.residual:.6e}" if math.isfinite(r.residual) else "undefined"
            lines.append(f"[{flag}] {r.name} ({r.kind})")
            lines.append(f"  residual {res}  tolerance {r.tolerance:.1e}  probes {r.probes}")
            lines.append(f"  anchor: {r.anchor}")
            if r.note:
                lines.append(f"  note: {r.note}")
        n_pass = sum(r.passed for r in self.results)
        lines.append("")
        lines.append(f"summary: {n_pass} passed, {len(self.results) - n_pass} failed")
        return "\n".join(lines) + "\n"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _masked_max(values, mask) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if mask is not None:
        v = v[mask]
    if v.size == 0:
        return 0.0
    if np.isnan(v).any():
        return float("nan")
    return float(v.max())


def _mx(*objs) -> float:
    out = 0.0
    for o in objs:
        v = calc.max_abs(o)
        if math.isnan(v):
            return float("nan")
        out = max(out, v)
    return out


def _tensor_diff(a: Tensor11, b: Tensor11) -> Tensor11:
    return Tensor11([[a.m[i][j] - b.m[i][j] for j in range(DIM)] for i in range(DIM)])


def suite_probes(cfg: RunConfig, n: int, seed: int) -> np.ndarray:
    s = cfg.solution
    box = cfg.box if cfg.box is not None else s.support_box()
    return probe_points(n, (box[0], box[1], box[2], (0.0, s.lam)), seed=seed)


def suite_fields(cfg: RunConfig):
    """(u, p, description) for the configured run."""
    s = cfg.solution
    sol = build_solution(s)
    u, p = sol.u, sol.p
    desc = f"built solution ({s.phase_family})"
    if cfg.u_expr is not None or cfg.p_expr is not None:
        from .dsl import ExprField

        params = {"eps": s.eps, "kappa": s.kappa, "l0": s.l0, "lambda": s.lam}
        parts = []
        if cfg.u_expr is not None:
            u = ExprField(cfg.u_expr, params)
            parts.append(f"u = {cfg.u_expr}")
        if cfg.p_expr is not None:
            p = ExprField(cfg.p_expr, params)
            parts.append(f"p = {cfg.p_expr}")
        desc = "; ".join(parts) + " (others from built solution)" if len(parts) < 2 else "; ".join(parts)
    return u, p, desc


def run_suite(
    cfg: RunConfig,
    provider=None,
    seed: int | None = None,
    probes: int | None = None,
    fields=None,
    planck: bool = True,
    threads=None,
    tol: Tolerances = TOLERANCES,
) -> SuiteReport:
    """Run every invariant in a fixed stage order and collect the results.

    ``fields`` = (u, p, description) overrides the configured fields.
    """
    if provider is None:
        provider = provider_from_name(cfg.provider, cfg.fd_step)
    elif isinstance(provider, str):
        provider = provider_from_name(provider, cfg.fd_step)
    seed = cfg.seed if seed is None else seed
    n = cfg.probes if probes is None else probes
    s = cfg.solution
    u, p, desc = fields if fields is not None else suite_fields(cfg)
    pts = suite_probes(cfg, n, seed)
    results: list[InvariantResult] = []
    extras: dict = {}
    stage = ""
    dyn = tol.dynamical(provider)
    route = tol.route(provider)

    def ev(obj):
        with np.errstate(all="ignore"):
            return calc.evaluate_chunked(obj, pts, threads=threads)

    def add(name, kind, residual, tolerance, anchor, note="", count=n, passed=None):
        residual = float(residual)
        ok = (residual <= tolerance) if passed is None else passed
        if math.isnan(residual):
            ok = False
        results.append(InvariantResult(name, kind, residual, tolerance, count, bool(ok), anchor, note, stage))

    def begin(name):
        nonlocal stage
        stage = name

    try:
        begin("fields")
        f = m.build_phlo(u, p, s.eps, s.kappa, s.l0, provider=provider, check=False)
        base = ev({"Phi2": f.Phi2})
        phi2 = base["Phi2"]
        peak = float(np.max(phi2)) if phi2.size else 0.0
        scale = max(1.0, peak)
        support = np.sqrt(phi2) > tol.support(provider) * math.sqrt(peak) if peak > 0 else np.zeros(n, bool)

        begin("convention lock")
        _, Ft_expanded = m.expanded_pair(f.u, f.p, s.eps)
        F_expanded, _ = m.expanded_pair(f.u, f.p, s.eps)
        v = ev({"a": hodge(f.F) - Ft_expanded, "b": f.F - F_expanded})
        add("star_lock", STRUCTURAL, _mx(v["a"], v["b"]), tol.structural * scale, "hodge(F) = F~, F = A^zeta")

        begin("projections")
        P = cn.build_projections(f.u, f.p, s.eps)
        I = Tensor11.identity()
        idem = [P[k].idempotence_defect() for k in P]
        comp = [
            _tensor_diff(P["V"].tensor + P["H"].tensor, I),
            _tensor_diff(P["Vt"].tensor + P["Ht"].tensor, I),
            P["V"].tensor.compose(P["H"].tensor),
            P["Vt"].tensor.compose(P["Ht"].tensor),
        ]
        tr1, tr2 = cn.trace_energy(P)
        projF = [P[k](w) for k in cn.COTANGENT_TAGS for w in (f.F, f.Ft)]
        v = ev({"idem": idem, "comp": comp, "tr": [tr1 - f.Phi2, tr2 - f.Phi2], "projF": projF,
                "vert": [P["Vt*"](f.A) - f.A, P["V*"](f.Astar) - f.Astar]})
        add("projection_idempotence", STRUCTURAL, _mx(v["idem"]), tol.structural * scale, "P o P = P")
        add("projection_complement", STRUCTURAL, _mx(v["comp"]), tol.structural * scale, "V + H = id, V o H = 0")
        add("trace_energy", STRUCTURAL, _mx(v["tr"]), tol.structural * scale, "-1/2 tr(V o H*) = u^2 + p^2")
        add("field_projections", STRUCTURAL, _mx(v["projF"], v["vert"]), tol.structural * scale,
            "V*(F) = H*(F) = 0; V~*(A) = A; V*(A*) = A*")

        begin("curvature")
        cf = cn.curvature_closed_form(f.u, f.p, s.eps, provider)
        nV = cn.nijenhuis_self(P["V"], provider, probes=pts[:64])
        nVt = cn.nijenhuis_self(P["Vt"], provider, probes=pts[:64])
        vform = wedge(P["V*"](dx(0)), P["V*"](dx(1)))
        v = ev({
            "nV": nV.bracket - cn.CurvatureForm({(2, 3): cf.Z1}),
            "nVt": nVt.bracket - cn.CurvatureForm({(2, 3): cf.Z2}),
            "Rbar": [nV.vertical, nVt.vertical],
            "mod": [cn.curvature_modulus(cf.R) - cf.K2, cn.curvature_modulus(cf.Rt) - cf.K2],
            "K2form": evaluate_on(vform, cf.Z1, cf.Z2) - s.eps * cf.K2,
        })
        add("curvature_closed_form", STRUCTURAL, _mx(v["nV"], v["nVt"]), route * scale,
            "[V,V](d_z, d_xi) = Z1, [V~,V~](d_z, d_xi) = Z2")
        add("vertical_curvature_zero", STRUCTURAL, _mx(v["Rbar"]), route * scale, "R-bar = 0 for V and V~")
        add("curvature_modulus", STRUCTURAL, _mx(v["mod"], v["K2form"]), tol.structural * scale,
            "|R|^2 = |R~|^2 = K^2; V*(dx)^V*(dy)(Z1, Z2) = eps K^2")

        begin("l0")
        summ = cn.l0_summary(f.u, f.p, s.eps, pts, provider, tol.support(provider))
        if summ.is_undefined or not np.all(summ.defined[summ.support]):
            add("l0_recovery", DYNAMICAL, float("nan"), tol.l0(provider), "l0^2 = (u^2 + p^2) / K^2",
                "undefined (plane-wave degenerate)")
        else:
            rel = np.abs(summ.values[summ.support] / s.l0 - 1.0)
            add("l0_recovery", DYNAMICAL, float(rel.max()), tol.l0(provider), "l0^2 = (u^2 + p^2) / K^2",
                f"min {summ.minimum:.9g} max {summ.maximum:.9g} median {summ.median:.9g}",
                count=int(summ.support.sum()))
        rng = np.random.default_rng(seed)
        draws = rng.uniform(-2.0, 2.0, size=(20, 2))
        mixes = []
        for a, b in draws:
            um, pm = cn.dual_mix(f.u, f.p, s.eps, float(a), float(b))
            mixes.append(cn.l0_squared(um, pm, s.eps, provider))
        with np.errstate(all="ignore"):
            v = ev({"base": cn.l0_squared(f.u, f.p, s.eps, provider), "K2": cf.K2, "mix": mixes})
        ok = support & (v["K2"] > 1e-30)
        worst = 0.0
        for arr in v["mix"]:
            if ok.any():
                worst = max(worst, float(np.max(np.abs(arr[ok] / v["base"][ok] - 1.0))))
        add("l0_dual_mix", STRUCTURAL, worst, tol.structural, "l0(a u + eps b p, eps b u - a p) = l0(u, p)",
            "20 seeded (a, b) draws", count=int(ok.sum()))

        begin("equations of motion")
        eom = m.eom_residuals(f)
        v = ev({"g": eom.groups(), "z": list(eom.z_relations)})
        anchors = {
            "scalar": "kappa*l0*X(u) = -p, kappa*l0*X(p) = u",
            "two_form": "kappa*l0*L_X F = eps*F~, kappa*l0*L_X F~ = -eps*F",
            "tensor": "kappa*l0*L_X(V - V0) = eps*(V~ - V0)",
            "lagrange": "kappa*l0*X^s d_s F~ = -eps*F, kappa*l0*X^s d_s F = eps*F~",
            "complex": "L_X Psi = (kappa/l0) J(Psi)",
        }
        for key, anchor in anchors.items():
            add(f"eom_{key}", DYNAMICAL, _mx(v["g"][key]), dyn * scale, anchor)
        add("eom_curvature_vectors", DYNAMICAL, _mx(v["z"]), dyn * scale, "kappa*l0*Z1 = A*bar, kappa*l0*Z2 = -Abar")

        begin("exchange fluxes")
        ex = m.exchange_fluxes(f)
        dFt = f.d(f.Ft)

        half_FtdFt = flux_contraction(f.Ft, dFt) * 0.5
        half_FdFt = flux_contraction(f.F, dFt) * 0.5
        R = m.rotation_rate(f)
        ee = -s.eps
        v = ev({
            "ids": [ex.first_identity, ex.balance],
            "chain": [
                ex.iZ1F - ex.half_flux_F * ee,
                ex.iZ1F - half_FtdFt * ee,
                ex.iZ1Ft - ex.half_flux_Ft_dF * ee,
                ex.iZ1Ft + half_FdFt * ee,
                ex.A_Z1 - f.transport(f.Phi2) * (0.5 * ee),
                ex.Astar_Z1 + R,
            ],
            "sol": [ex.iZ1F, ex.iZ1Ft + f.zeta * (f.Phi2 * (s.kappa / s.l0))],
        })
        add("exchange_identities", STRUCTURAL, _mx(v["ids"]), tol.structural * scale,
            "i(Z1)F = i(Z2)*F, i(Z1)*F = -i(Z2)F")
        add("exchange_flux_chain", STRUCTURAL, _mx(v["chain"]), route * scale,
            "i(Z1)F = -eps*1/2 F^{sr}(dF)_{srm} dx^m, i(Z1)*F = <A*,Z1> zeta = -R zeta",
            "signs as computed with the locked conventions; they agree with the display for eps = -1")
        add("exchange_on_solution", DYNAMICAL, _mx(v["sol"]), dyn * scale,
            "i(Z1)F = 0, i(Z1)*F = -(kappa/l0) Phi^2 zeta")

        begin("invariants")
        I1, I2 = m.zero_invariants(f)
        T = m.stress_tensor(f)
        v = ev({"inv": [I1, I2], "null": m.null_condition(T),
                "sub": m.sub_energy(f.F) - m.sub_energy(f.Ft), "ed": T.m[3][3] - f.Phi2})
        add("zero_invariants", STRUCTURAL, _mx(v["inv"]), tol.structural * scale, "F_{mn}F^{mn} = F_{mn}(*F)^{mn} = 0")
        add("null_condition", STRUCTURAL, _mx(v["null"]) / scale**2, tol.structural, "T_{mn}T^{mn} = 0",
            "residual relative to max(1, Phi^2)^2")
        add("equal_sub_energies", STRUCTURAL, _mx(v["sub"]), tol.structural * scale, "F_{ms}F^{ns} = (*F)_{ms}(*F)^{ns}")
        add("energy_density", STRUCTURAL, _mx(v["ed"]), tol.structural * scale, "T_4^4 = u^2 + p^2")

        begin("stress divergence")
        sd = m.stress_divergence(f)
        v = ev({"routes": [sd.direct - sd.flux, sd.flux - sd.coderivative], "zero": [sd.direct, sd.flux]})
        add("stress_divergence_routes", STRUCTURAL, _mx(v["routes"]), route * scale,
            "d_n T_m^n = 1/2[F^{ab}(dF)_{abm} + (*F)^{ab}(d*F)_{abm}] = F_{mn}(delta F)^n + (*F)_{mn}(delta *F)^n, delta = *d*")
        add("stress_divergence_zero", DYNAMICAL, _mx(v["zero"]), dyn * scale, "d_n T_m^n = 0")

        begin("extended electrodynamics")
        eed = m.eed_residuals(f)
        v = ev([eed.r1, eed.r2, eed.r3])
        add("eed_residuals", DYNAMICAL, _mx(v[0], v[1]), dyn * scale, "i(F)dF = 0, i(*F)d*F = 0")
        add("eed_balance", STRUCTURAL, _mx(v[2]), route * scale, "i(*F)dF = -i(F)d*F",
            "holds for every (u, p) once the exchange identities hold")

        begin("amplitude and phase")
        ap = m.amplitude_phase(f)
        Xpsi_direct = f.transport(f.psi)
        v = ev({"XPhi": ap.X_Phi, "Xpsi": Xpsi_direct, "Phi2": f.Phi2, "R": R})
        add("amplitude_transport", DYNAMICAL, _masked_max(v["XPhi"], support), dyn * math.sqrt(scale),
            "L_X Phi = 0", "over the support", count=int(support.sum()))
        add("phase_transport", DYNAMICAL, _masked_max(v["Xpsi"] - s.kappa / s.l0, support), dyn,
            "L_X psi = kappa/l0", "over the support", count=int(support.sum()))
        defined = v["Phi2"] > 1e-30
        add("phase_rate_identity", STRUCTURAL, _masked_max(v["R"] - v["Phi2"] * v["Xpsi"], defined), route * scale,
            "u X(p) - p X(u) = Phi^2 L_X psi", "where Phi > 1e-15", count=int(defined.sum()))

        begin("frame rotation")
        rot = m.frame_rotation(f)
        with np.errstate(all="ignore"):
            Ms, Mc, mask = m.solve_frame_rotation(rot, pts)
        mask = mask & support
        target = s.eps * s.kappa / s.l0 * np.array([[0.0, 1.0], [-1.0, 0.0]])
        rel = np.abs(Ms - Mc) / (1.0 + np.abs(Mc))
        add("frame_rotation_solve", STRUCTURAL, _masked_max(rel.reshape(len(pts), -1).max(axis=1), mask), route,
            "([Abar,X], [A*bar,X]) = (Abar, A*bar) M, M = -1/2 X(Phi^2)/Phi^2 I + eps L_X psi J",
            "relative, over the support", count=int(mask.sum()))
        add("frame_rotation_solution", DYNAMICAL,
            _masked_max(np.abs(Mc - target).reshape(len(pts), -1).max(axis=1), mask), dyn,
            "M = eps (kappa/l0) J", "over the support", count=int(mask.sum()))

        begin("shuffling symmetry")
        sh = m.shuffle_check(f)
        v = ev(sh.transverse_parts())
        add("shuffle_symmetry", STRUCTURAL, _mx(v) if sh.x_outside() else float("inf"), tol.structural * scale,
            "[Abar,X], [A*bar,X] in span(d_x, d_y), X outside it")

        begin("Frobenius 4-form")
        fr = m.frobenius_4form(f)
        v = ev({"eq": [fr.main - fr.dual, fr.main - fr.expected],
                "sol": fr.main - f.Phi2 * (s.eps * s.kappa / s.l0)})
        add("frobenius_4form_equality", STRUCTURAL, _mx(v["eq"]), tol.structural * scale,
            "dA^A^zeta = dA*^A*^zeta = eps R omega0")
        add("frobenius_4form_solution", DYNAMICAL, _mx(v["sol"]), dyn * scale,
            "dA^A^zeta = eps kappa Phi^2 / l0 omega0")

        if planck:
            begin("Planck relation")
            counts = (cfg.nx, cfg.ny, cfg.nz)
            box = cfg.box if cfg.box is not None else s.support_box()
            try:
                rep = m.planck_action(s, counts + (cfg.nz,), box=box, fields=(u, p), tolerance=tol.quadrature,
                                      threads=threads)
                rich = rep.richardson_relative
                extras["planck"] = rep.to_dict()
                add("planck_relation", DYNAMICAL, rep.mismatch, tol.quadrature,
                    "integral of (l0/c) dA^A^zeta over R^3 x lambda = eps kappa E T",
                    f"E={rep.E:.9e} T={rep.T:.9e} H={rep.H:.9e} richardson={rich:.3e}",
                    count=int(np.prod(rep.counts)), passed=rep.mismatch <= tol.quadrature and rich <= tol.quadrature)
            except TruncationError as exc:
                add("planck_relation", DYNAMICAL, float("nan"), tol.quadrature,
                    "integral of (l0/c) dA^A^zeta over R^3 x lambda = eps kappa E T", str(exc), count=0)
            try:
                es = []
                for k in range(5):
                    t = k * s.lam / (5 * s.c)  # off the grid lattice
                    es.append(energy((u, p), box=box, counts=counts, t=t, c=s.c, threads=threads).value)
                mean = sum(es) / len(es)
                spread = (max(es) - min(es)) / abs(mean) if mean else 0.0
                add("energy_conservation", DYNAMICAL, spread, tol.conservation,
                    "E(t) = integral of Phi^2 d^3x is constant",
                    "5 slices over one period: " + " ".join(f"{e:.9e}" for e in es),
                    count=5 * int(np.prod(counts)))
            except TruncationError as exc:
                add("energy_conservation", DYNAMICAL, float("nan"), tol.conservation,
                    "E(t) = integral of Phi^2 d^3x is constant", str(exc), count=0)
    except StageError:
        raise
    except Exception as exc:  # construction failures name the stage
        raise StageError(stage, exc) from exc

    return SuiteReport(
        results=results,
        config=cfg.echo(),
        provider=provider.name,
        fd_step=getattr(provider, "h", cfg.fd_step),
        seed=seed,
        probes=n,
        fields=desc,
        extras=extras,
    )
