"""The field pair (F, *F) built from (u, p) and the quantities derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus as calc
from .calculus import ScalarField, as_field, directional, exterior_derivative, lie_bracket
from .connections import build_projections, curvature_closed_form, propagation_vector, vertical_identity
from .exterior import (
    DIM,
    ETA,
    Form,
    Tensor11,
    Vector,
    basis_form,
    flux_contraction,
    hodge,
    interior,
    invariant_contraction,
    pairing,
    sharp,
    wedge,
)
from .probes import probe_points


class ConventionError(RuntimeError):
    pass


def _field(v):
    return v if isinstance(v, ScalarField) else as_field(v)


@dataclass
class PhLOFields:
    u: ScalarField
    p: ScalarField
    eps: int
    kappa: int
    l0: float
    provider: object
    A: Form
    Astar: Form
    zeta: Form
    X: Vector
    F: Form
    Ft: Form

    @property
    def Phi2(self) -> ScalarField:
        return self.u * self.u + self.p * self.p

    @property
    def Phi(self) -> ScalarField:
        return calc.sqrt(self.Phi2)

    @property
    def psi(self) -> ScalarField:
        return calc.atan2(self.p, self.u)

    @property
    def Abar(self) -> Vector:
        return sharp(self.A)

    @property
    def Astar_bar(self) -> Vector:
        return sharp(self.Astar)

    def transport(self, f) -> ScalarField:
        return directional(self.X, f, self.provider)

    def d(self, w: Form) -> Form:
        return exterior_derivative(w, self.provider)


def build_phlo(u, p, eps: int, kappa: int = 1, l0: float = 1.0, provider=None, probes=None, check=True) -> PhLOFields:
    if eps not in (-1, 1) or kappa not in (-1, 1):
        raise ValueError("epsilon and kappa must be +1 or -1")
    if not l0 > 0:
        raise ValueError("l0 must be positive")
    u, p = _field(u), _field(p)
    A = Form(1, {(0,): u, (1,): p})
    Astar = Form(1, {(0,): -eps * p, (1,): eps * u})
    zeta = Form(1, {(2,): float(eps), (3,): 1.0})
    F = wedge(A, zeta)
    Ft = wedge(Astar, zeta)
    fields = PhLOFields(u, p, eps, kappa, float(l0), provider, A, Astar, zeta, propagation_vector(eps), F, Ft)
    if check:
        pts = probe_points(64, seed=11) if probes is None else probes
        got = calc.evaluate({"star": hodge(F), "Ft": Ft, "amp": fields.Phi2}, pts)
        scale = 1.0 + float(np.max(np.abs(got["amp"])))
        defect = calc.max_abs(got["star"] - got["Ft"])
        if not defect <= 1e-12 * scale:
            raise ConventionError(f"hodge(F) differs from F~ by {defect:.3e}")
    return fields


def expanded_pair(u, p, eps: int):
    """F and F~ written out term by term."""
    F = (
        basis_form(0, 2) * (eps * u)
        + basis_form(0, 3) * u
        + basis_form(1, 2) * (eps * p)
        + basis_form(1, 3) * p
    )
    Ft = (
        basis_form(0, 2) * (-p)
        + basis_form(0, 3) * (-eps * p)
        + basis_form(1, 2) * u
        + basis_form(1, 3) * (eps * u)
    )
    return F, Ft


# ---------------------------------------------------------------- stress tensor


def _upper(F: Form, a: int, b: int):
    return F[(a, b)] * (ETA[a] * ETA[b]) if not calc.is_zero(F[(a, b)]) else 0.0


def sub_energy(F: Form) -> Tensor11:
    """Matrix with entries F_{m s} F^{n s} (row m, column n)."""
    rows = []
    for m in range(DIM):
        row = []
        for n in range(DIM):
            acc = 0.0
            for s in range(DIM):
                a, b = F[(m, s)], _upper(F, n, s)
                if not (calc.is_zero(a) or calc.is_zero(b)):
                    acc = acc + a * b
            row.append(acc)
        rows.append(row)
    return Tensor11(rows)


def stress_tensor(f: PhLOFields) -> Tensor11:
    """T_m^n = -1/2 [F_{ms} F^{ns} + F~_{ms} F~^{ns}], stored as m[m][n]."""
    return (sub_energy(f.F) + sub_energy(f.Ft)) * -0.5


def lowered(T: Tensor11) -> Tensor11:
    return Tensor11([[T.m[m][n] * ETA[n] if not calc.is_zero(T.m[m][n]) else 0.0 for n in range(DIM)] for m in range(DIM)])


def null_condition(T: Tensor11):
    """T_{mn} T^{mn}."""
    acc = 0.0
    for m in range(DIM):
        for n in range(DIM):
            t = T.m[m][n]
            if not calc.is_zero(t):
                acc = acc + t * t * (ETA[m] * ETA[n])
    return acc


def energy_density(f: PhLOFields):
    return stress_tensor(f).m[3][3]


@dataclass
class StressDivergence:
    direct: Form  # d_n T_m^n
    flux: Form  # 1/2 [F^{ab}(dF)_{abm} + F~^{ab}(dF~)_{abm}]
    coderivative: Form  # F_{mn}(dF)^n + F~_{mn}(dF~)^n with the literal *d*


def _index_contract(F: Form, w: Form) -> Form:
    """F_{mn} w^n."""
    out = {}
    for m in range(DIM):
        acc = 0.0
        for n in range(DIM):
            a, b = F[(m, n)], w[(n,)]
            if not (calc.is_zero(a) or calc.is_zero(b)):
                acc = acc + a * b * ETA[n]
        if not calc.is_zero(acc):
            out[(m,)] = acc
    return Form(1, out)


def stress_divergence(f: PhLOFields) -> StressDivergence:
    T = stress_tensor(f)
    direct = {}
    for m in range(DIM):
        acc = 0.0
        for n in range(DIM):
            if not calc.is_zero(T.m[m][n]):
                acc = acc + T.m[m][n].partial(n, f.provider)
        direct[(m,)] = acc
    dF, dFt = f.d(f.F), f.d(f.Ft)
    flux = (flux_contraction(f.F, dF) + flux_contraction(f.Ft, dFt)) * 0.5
    cod = _index_contract(f.F, calc.coderivative(f.F, f.provider)) + _index_contract(
        f.Ft, calc.coderivative(f.Ft, f.provider)
    )
    return StressDivergence(Form(1, direct), flux, cod)


# ---------------------------------------------------------------- exchange fluxes


@dataclass
class ExchangeFluxes:
    iZ1F: Form
    iZ2Ft: Form
    iZ1Ft: Form
    iZ2F: Form
    A_Z1: ScalarField  # <A, Z1>
    Astar_Z1: ScalarField  # <A*, Z1>
    half_flux_F: Form  # 1/2 F^{sr}(dF)_{srm}
    half_flux_Ft_dF: Form  # 1/2 F~^{sr}(dF)_{srm}

    @property
    def first_identity(self) -> Form:
        return self.iZ1F - self.iZ2Ft

    @property
    def balance(self) -> Form:
        return self.iZ1Ft + self.iZ2F


def exchange_fluxes(f: PhLOFields) -> ExchangeFluxes:
    cf = curvature_closed_form(f.u, f.p, f.eps, f.provider)
    dF = f.d(f.F)
    return ExchangeFluxes(
        iZ1F=interior(cf.Z1, f.F),
        iZ2Ft=interior(cf.Z2, f.Ft),
        iZ1Ft=interior(cf.Z1, f.Ft),
        iZ2F=interior(cf.Z2, f.F),
        A_Z1=pairing(f.A, cf.Z1),
        Astar_Z1=pairing(f.Astar, cf.Z1),
        half_flux_F=flux_contraction(f.F, dF) * 0.5,
        half_flux_Ft_dF=flux_contraction(f.Ft, dF) * 0.5,
    )


# ---------------------------------------------------------------- equations of motion


def rotation_rate(f: PhLOFields) -> ScalarField:
    """R = u X(p) - p X(u), equal to Phi^2 X(psi)."""
    return f.u * f.transport(f.p) - f.p * f.transport(f.u)


@dataclass
class EOMResiduals:
    scalar: tuple  # (k l0 X(u) + p, k l0 X(p) - u)
    two_form: Form  # k l0 L_X F - eps F~
    two_form_dual: Form  # k l0 L_X F~ + eps F
    tensor: Tensor11  # k l0 L_X(V - V0) - eps (V~ - V0)
    lagrange: tuple  # (k l0 X^s d_s F~ + eps F, k l0 X^s d_s F - eps F~)
    complex: tuple  # 2x2 entries of L_X Psi - (k/l0) J Psi
    z_relations: tuple  # (k l0 Z1 - A*bar, k l0 Z2 + Abar)

    def groups(self) -> dict:
        return {
            "scalar": list(self.scalar),
            "two_form": [self.two_form, self.two_form_dual],
            "tensor": self.tensor,
            "lagrange": list(self.lagrange),
            "complex": list(self.complex),
        }


J2 = ((0.0, 1.0), (-1.0, 0.0))


def eom_residuals(f: PhLOFields) -> EOMResiduals:
    k, l0, eps = f.kappa, f.l0, f.eps
    kl = k * l0
    Xu, Xp = f.transport(f.u), f.transport(f.p)
    LF = calc.lie_derivative_form(f.X, f.F, f.provider)
    LFt = calc.lie_derivative_form(f.X, f.Ft, f.provider)
    P = build_projections(f.u, f.p, eps)
    V0 = vertical_identity()
    LV = calc.lie_derivative_tensor11(f.X, P["V"].tensor - V0, f.provider)
    tensor = LV * kl - (P["Vt"].tensor - V0) * eps
    Ft_x = calc.lie_derivative_form_constant(f.X, f.Ft, f.provider)
    F_x = calc.lie_derivative_form_constant(f.X, f.F, f.provider)
    # Psi = u I + p J; L_X Psi = X(u) I + X(p) J; J Psi = u J - p I
    w = k / l0
    c0 = Xu + w * f.p  # coefficient of I
    c1 = Xp - w * f.u  # coefficient of J
    complex_entries = (c0, c1 * J2[0][1], c1 * J2[1][0], c0)
    cf = curvature_closed_form(f.u, f.p, eps, f.provider)
    z1 = cf.Z1 * kl - f.Astar_bar
    z2 = cf.Z2 * kl + f.Abar
    return EOMResiduals(
        scalar=(Xu * kl + f.p, Xp * kl - f.u),
        two_form=LF * kl - f.Ft * eps,
        two_form_dual=LFt * kl + f.F * eps,
        tensor=tensor,
        lagrange=(Ft_x * kl + f.F * eps, F_x * kl - f.Ft * eps),
        complex=complex_entries,
        z_relations=(z1, z2),
    )


@dataclass
class EEDResiduals:
    r1: Form
    r2: Form
    r3: Form


def eed_residuals(f: PhLOFields) -> EEDResiduals:
    dF, dFt = f.d(f.F), f.d(f.Ft)
    return EEDResiduals(
        r1=flux_contraction(f.F, dF),
        r2=flux_contraction(f.Ft, dFt),
        r3=flux_contraction(f.Ft, dF) + flux_contraction(f.F, dFt),
    )


@dataclass
class AmplitudePhase:
    Phi: ScalarField
    psi: ScalarField
    X_Phi: ScalarField
    X_psi: ScalarField


def amplitude_phase(f: PhLOFields) -> AmplitudePhase:
    """Amplitude, phase and their transports.

    X(Phi) and X(psi) are written through u, p and their transports so they
    stay finite on the support; they are meaningless where Phi vanishes, which
    callers mask with :func:`phase_mask`.
    """
    Xu, Xp = f.transport(f.u), f.transport(f.p)
    Phi = f.Phi
    return AmplitudePhase(
        Phi=Phi,
        psi=f.psi,
        X_Phi=(f.u * Xu + f.p * Xp) / Phi,
        X_psi=(f.u * Xp - f.p * Xu) / f.Phi2,
    )


def phase_mask(phi_values, threshold: float = 1e-30) -> np.ndarray:
    """Points where the phase is defined."""
    return np.asarray(phi_values) > threshold


# ---------------------------------------------------------------- frame rotation


@dataclass
class FrameRotation:
    closed_form: tuple  # (alpha, beta, gamma, delta) fields
    brackets: tuple  # ([Abar, X], [A*bar, X])
    frame: tuple  # (Abar, A*bar)


def frame_rotation(f: PhLOFields) -> FrameRotation:
    """M with ([Abar,X], [A*bar,X]) = (Abar, A*bar) M.

    Closed form: M = -1/2 (X(Phi^2)/Phi^2) I + eps X(psi) J.
    """
    Phi2 = f.Phi2
    half = f.transport(Phi2) * 0.5 / Phi2
    rot = rotation_rate(f) * f.eps / Phi2
    closed = (
        -half + rot * J2[0][0],
        rot * J2[0][1],
        rot * J2[1][0],
        -half + rot * J2[1][1],
    )
    Abar, Asbar = f.Abar, f.Astar_bar
    return FrameRotation(closed, (lie_bracket(Abar, f.X, f.provider), lie_bracket(Asbar, f.X, f.provider)), (Abar, Asbar))


def solve_frame_rotation(rot: FrameRotation, points, threshold: float = 1e-12):
    """Per-probe 2x2 solve; returns (M_solved, M_closed, mask), M arrays of shape (n, 2, 2)."""
    vals = calc.evaluate_chunked({"closed": list(rot.closed_form), "br": list(rot.brackets), "fr": list(rot.frame)}, points)
    B = np.stack(
        [np.stack([vals["fr"][0][0], vals["fr"][1][0]], -1), np.stack([vals["fr"][0][1], vals["fr"][1][1]], -1)], 1
    )
    C = np.stack(
        [np.stack([vals["br"][0][0], vals["br"][1][0]], -1), np.stack([vals["br"][0][1], vals["br"][1][1]], -1)], 1
    )
    det = np.abs(np.linalg.det(B))
    mask = det > threshold
    M = np.full(B.shape, np.nan)
    if mask.any():
        M[mask] = np.linalg.solve(B[mask], C[mask])
    a, b, c, d = vals["closed"]
    closed = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], 1)
    return M, closed, mask


@dataclass
class ShuffleCheck:
    brackets: tuple
    X: Vector

    def transverse_parts(self):
        """z and xi components of both brackets (zero for a shuffling symmetry)."""
        return [br[2] for br in self.brackets] + [br[3] for br in self.brackets]

    def x_outside(self) -> bool:
        return any(not calc.is_zero(self.X[i]) for i in (2, 3))


def shuffle_check(f: PhLOFields) -> ShuffleCheck:
    return ShuffleCheck(
        (lie_bracket(f.Abar, f.X, f.provider), lie_bracket(f.Astar_bar, f.X, f.provider)),
        f.X,
    )


# ---------------------------------------------------------------- Frobenius 4-form


@dataclass
class Frobenius4:
    main: ScalarField  # coefficient of dA ^ A ^ zeta
    dual: ScalarField  # coefficient of dA* ^ A* ^ zeta
    expected: ScalarField  # eps R


def _top(w: Form):
    return w.comps.get((0, 1, 2, 3), 0.0)


def frobenius_4form(f: PhLOFields) -> Frobenius4:
    main = _top(wedge(wedge(f.d(f.A), f.A), f.zeta))
    dual = _top(wedge(wedge(f.d(f.Astar), f.Astar), f.zeta))
    return Frobenius4(_field(main), _field(dual), rotation_rate(f) * f.eps)


def zero_invariants(f: PhLOFields):
    return invariant_contraction(f.F, f.F), invariant_contraction(f.F, f.Ft)


# ---------------------------------------------------------------- Planck relation


@dataclass
class PlanckReport:
    E: float  # integral energy at t = 0
    T: float  # period lambda / c
    H: float  # 4-volume integral of (l0/c) dA ^ A ^ zeta
    nu: float
    h: float  # E T
    expected: float  # eps kappa E T
    mismatch: float  # |H - eps kappa E T| / |E T|
    H_error: float  # Richardson estimates
    E_error: float
    counts: tuple
    box: tuple
    warnings: list

    @property
    def richardson_relative(self) -> float:
        if self.E == 0:
            return 0.0
        return max(self.H_error / abs(self.E * self.T), self.E_error / abs(self.E))

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "T": self.T,
            "H": self.H,
            "nu": self.nu,
            "h": self.h,
            "expected_H": self.expected,
            "mismatch": self.mismatch,
            "richardson_relative": self.richardson_relative,
            "grid": list(self.counts),
            "box": [list(r) for r in self.box],
            "warnings": list(self.warnings),
        }


def planck_action(config, counts=(64, 64, 64, 64), box=None, fields=None, tolerance: float = 0.01, threads=None) -> PlanckReport:
    """H = integral of (l0/c) dA ^ A ^ zeta over box x [0, lambda], compared with eps kappa E T.

    ``fields`` may replace the built solution with any (u, p) pair; the
    spatial box must then contain the support for every xi in [0, lambda].
    """
    from .quadrature import integrate_with_error
    from .solutions import build_solution, check_support

    if fields is None:
        sol = build_solution(config)
        u, p = sol.u, sol.p
    else:
        u, p = fields
    box = tuple(box) if box is not None else config.support_box()
    f = build_phlo(u, p, config.eps, config.kappa, config.l0, check=False)
    lam, c = config.lam, config.c
    nx, ny, nz, nxi = counts
    f2 = f.Phi2
    check_support(f2, box, 0.0)
    Eq = integrate_with_error(f2, [box[0], box[1], box[2], 0.0], [nx, ny, nz], threads)
    density = frobenius_4form(f).main * (config.l0 / c)
    Hq = integrate_with_error(density, [box[0], box[1], box[2], (0.0, lam)], [nx, ny, nz, nxi], threads)
    T = lam / c
    E, H = Eq.value, Hq.value
    ET = E * T
    expected = config.eps * config.kappa * ET
    mismatch = abs(H - expected) / abs(ET) if ET != 0 else abs(H)
    rep = PlanckReport(E, T, H, 1.0 / T, ET, expected, mismatch, Hq.error, Eq.error, tuple(counts), box, [])
    if rep.richardson_relative > tolerance:
        rep.warnings.append(
            f"grid too coarse: Richardson estimate {rep.richardson_relative:.2e} exceeds {tolerance:.0e};"
            f" try grid {','.join(str(2 * n) for n in counts)}"
        )
    return rep
