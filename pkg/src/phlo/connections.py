"""Projection fields, their Nijenhuis curvature, and Frobenius integrability.

Matrices follow the layout of :class:`phlo.exterior.Tensor11`: row = vector
index, column = form index.  The cotangent projections (V*, H*, ...) are
stored as their own displayed matrices, which are the transposes of the
tangent ones; they pull forms back through the tangent matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import calculus as calc
from .calculus import ScalarField, evaluate, lie_bracket
from .exterior import (
    DIM,
    AXES,
    Form,
    Tensor11,
    Vector,
    coordinate_vector,
    dx,
    evaluate_on,
    pairing,
    wedge,
)
from .probes import probe_points

TANGENT_TAGS = ("V", "Vt", "H", "Ht")
COTANGENT_TAGS = ("V*", "H*", "Vt*", "Ht*")


class NotAProjection(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class PairingViolation(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionField:
    tensor: Tensor11
    tag: str = "custom"

    @property
    def cotangent(self) -> bool:
        return self.tag.endswith("*")

    @property
    def tangent_matrix(self) -> Tensor11:
        return self.tensor.transpose() if self.cotangent else self.tensor

    def apply(self, v: Vector) -> Vector:
        if self.cotangent:
            raise TypeError(f"{self.tag} acts on forms")
        return self.tensor.apply(v)

    def __call__(self, w: Form) -> Form:
        """Action on forms: pull back through the tangent matrix."""
        return self.tangent_matrix.pullback(w)

    def idempotence_defect(self) -> Tensor11:
        return self.tensor.compose(self.tensor) - self.tensor


def _m(entries):
    return Tensor11(entries)


def vertical_identity() -> Tensor11:
    """V0 = dx (x) d_x + dy (x) d_y."""
    m = [[0.0] * DIM for _ in range(DIM)]
    m[0][0] = m[1][1] = 1.0
    return Tensor11(m)


def build_projections(u, p, eps: int) -> dict[str, ProjectionField]:
    if eps not in (-1, 1):
        raise ValueError("epsilon must be +1 or -1")
    z = 0.0
    V = _m([[1, 0, -eps * u, -u], [0, 1, -eps * p, -p], [z] * 4, [z] * 4])
    H = _m([[0, 0, eps * u, u], [0, 0, eps * p, p], [0, 0, 1, 0], [0, 0, 0, 1]])
    Vt = _m([[1, 0, p, eps * p], [0, 1, -u, -eps * u], [z] * 4, [z] * 4])
    Ht = _m([[0, 0, -p, -eps * p], [0, 0, u, eps * u], [0, 0, 1, 0], [0, 0, 0, 1]])
    out = {
        "V": ProjectionField(V, "V"),
        "H": ProjectionField(H, "H"),
        "Vt": ProjectionField(Vt, "Vt"),
        "Ht": ProjectionField(Ht, "Ht"),
    }
    for name in ("V", "H", "Vt", "Ht"):
        out[name + "*"] = ProjectionField(out[name].tensor.transpose(), name + "*")
    return out


def trace_energy(P: dict) -> tuple:
    """(-1/2 tr(V o H*), -1/2 tr(Vt o Ht*)); both equal u^2 + p^2."""
    a = P["V"].tensor.compose(P["H*"].tensor).trace()
    b = P["Vt"].tensor.compose(P["Ht*"].tensor).trace()
    return -0.5 * a, -0.5 * b


# ---------------------------------------------------------------- curvature forms


@dataclass
class CurvatureForm:
    """Vector-valued 2-form: one vector per argument pair (i < j)."""

    values: dict
    labels: tuple = AXES

    def __getitem__(self, pair):
        i, j = pair
        if i == j:
            return Vector([0.0] * DIM)
        if i < j:
            return self.values.get((i, j), Vector([0.0] * DIM))
        return -self.values.get((j, i), Vector([0.0] * DIM))

    def evaluate_fields(self, fn):
        return CurvatureForm({k: v.map(fn) for k, v in self.values.items()}, self.labels)

    @classmethod
    def concat(cls, parts):
        keys = parts[0].values.keys()
        return cls(
            {k: Vector(np.concatenate([p.values[k][i] for p in parts]) for i in range(DIM)) for k in keys},
            parts[0].labels,
        )

    def __sub__(self, other):
        keys = set(self.values) | set(other.values)
        return CurvatureForm({k: self[k] - other[k] for k in keys}, self.labels)

    def __add__(self, other):
        keys = set(self.values) | set(other.values)
        return CurvatureForm({k: self[k] + other[k] for k in keys}, self.labels)


@dataclass
class NijenhuisResult:
    bracket: CurvatureForm  # [P, P]
    horizontal: CurvatureForm  # R: vertical part of brackets of horizontal lifts
    vertical: CurvatureForm  # R-bar: horizontal part of brackets of vertical lifts


def check_projection(P: ProjectionField, probes=None, tol: float = 1e-12):
    pts = probe_points(64, seed=7) if probes is None else probes
    defect = calc.max_abs(evaluate(P.idempotence_defect(), pts))
    scale = max(1.0, calc.max_abs(evaluate(P.tensor, pts)))
    if not defect <= tol * scale**2:
        raise NotAProjection(f"not a projection: |P o P - P| = {defect:.3e}")


def nijenhuis_self(P: ProjectionField, provider=None, probes=None) -> NijenhuisResult:
    """[P, P] on coordinate pairs, split into R and R-bar.

    [P,P](a, b) = P[a,b] + [Pa, Pb] - P[a, Pb] - P[Pa, b]; the coordinate
    brackets [a, b] vanish.  For an idempotent P this equals
    V[Ha, Hb] + H[Va, Vb] with V = P and H = id - P.
    """
    if P.cotangent:
        raise TypeError("nijenhuis_self needs a tangent projection")
    check_projection(P, probes)
    Pm = P.tensor
    Hm = Tensor11.identity() - Pm
    full, hor, ver = {}, {}, {}
    for a, b in itertools.combinations(range(DIM), 2):
        ea, eb = coordinate_vector(a), coordinate_vector(b)
        Pa, Pb = Pm.column(a), Pm.column(b)
        Ha, Hb = Hm.column(a), Hm.column(b)
        full[(a, b)] = (
            lie_bracket(Pa, Pb, provider)
            - Pm.apply(lie_bracket(ea, Pb, provider))
            - Pm.apply(lie_bracket(Pa, eb, provider))
        )
        hor[(a, b)] = Pm.apply(lie_bracket(Ha, Hb, provider))
        ver[(a, b)] = Hm.apply(lie_bracket(Pa, Pb, provider))
    return NijenhuisResult(CurvatureForm(full), CurvatureForm(hor), CurvatureForm(ver))


def transport(f, eps: int, provider=None) -> ScalarField:
    """f_xi - eps f_z, i.e. the derivative along X = -eps d_z + d_xi."""
    return calc.directional(propagation_vector(eps), f, provider)


def propagation_vector(eps: int) -> Vector:
    return Vector([0.0, 0.0, float(-eps), 1.0])


@dataclass
class ClosedFormCurvature:
    R: CurvatureForm
    Rt: CurvatureForm
    Z1: Vector
    Z2: Vector
    K2: ScalarField


def curvature_closed_form(u, p, eps: int, provider=None) -> ClosedFormCurvature:
    a = transport(u, eps, provider)
    b = transport(p, eps, provider)
    Z1 = Vector([-eps * a, -eps * b, 0.0, 0.0])
    Z2 = Vector([b, -a, 0.0, 0.0])
    return ClosedFormCurvature(
        R=CurvatureForm({(2, 3): Z1}),
        Rt=CurvatureForm({(2, 3): Z2}),
        Z1=Z1,
        Z2=Z2,
        K2=a * a + b * b,
    )


def curvature_modulus(R: CurvatureForm):
    """|R|^2: Euclidean square of the (x, y) values summed over pairs."""
    acc = 0.0
    for vec in R.values.values():
        for comp in vec:
            if not calc.is_zero(comp) and not isinstance(comp, (int, float)):
                acc = acc + comp * comp
    return acc


# ---------------------------------------------------------------- l0


def l0_squared(u, p, eps: int, provider=None) -> ScalarField:
    cf = curvature_closed_form(u, p, eps, provider)
    return (u * u + p * p) / cf.K2


def l0_field(u, p, eps: int, provider=None) -> ScalarField:
    return calc.sqrt(l0_squared(u, p, eps, provider))


@dataclass
class L0Summary:
    values: np.ndarray  # NaN where undefined
    defined: np.ndarray
    support: np.ndarray
    minimum: float
    maximum: float
    median: float
    undefined_count: int

    @property
    def is_undefined(self) -> bool:
        return not self.support.any()


def l0_summary(u, p, eps: int, points, provider=None, threshold: float = 1e-6) -> L0Summary:
    """l0 over the support (Phi > threshold * max Phi), flagging K^2 <= 1e-30 as undefined."""
    cf = curvature_closed_form(u, p, eps, provider)
    vals = calc.evaluate_chunked({"amp2": u * u + p * p, "K2": cf.K2}, points)
    amp2, K2 = vals["amp2"], vals["K2"]
    defined = K2 > 1e-30
    l0 = np.full(len(amp2), np.nan)
    l0[defined] = np.sqrt(amp2[defined] / K2[defined])
    phi = np.sqrt(amp2)
    peak = phi.max() if phi.size else 0.0
    support = (phi > threshold * peak) & (peak > 0)
    sel = l0[support & defined]
    if sel.size:
        stats = float(sel.min()), float(sel.max()), float(np.median(sel))
    else:
        stats = (float("nan"),) * 3
    return L0Summary(l0, defined, support, *stats, int((~defined).sum()))


def dual_mix(u, p, eps: int, a: float, b: float):
    """(a u + eps b p, eps b u - a p): rescales u^2+p^2 and K^2 by a^2+b^2, leaving l0 fixed."""
    if a == 0 and b == 0:
        raise ValueError("dual_mix needs (a, b) != (0, 0)")
    return a * u + eps * b * p, eps * b * u - a * p


# ---------------------------------------------------------------- Frobenius


@dataclass
class PairReport:
    i: int
    j: int
    max_out_of_span: float
    sticking_out: np.ndarray  # (n, 4): complement part of [X_i, X_j] at each probe
    complement: tuple


@dataclass
class IntegrabilityReport:
    integrable: bool
    pairs: list
    max_magnitude: float
    tolerance: float
    probe_count: int
    complement: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "integrable": self.integrable,
            "max_magnitude": self.max_magnitude,
            "tolerance": self.tolerance,
            "probes": self.probe_count,
            "complement": [AXES[i] for i in self.complement],
            "pairs": [
                {
                    "i": pr.i,
                    "j": pr.j,
                    "max_out_of_span": pr.max_out_of_span,
                    "sticking_out_max_abs": [float(np.max(np.abs(pr.sticking_out[:, k]))) for k in range(DIM)],
                }
                for pr in self.pairs
            ],
        }

    def to_text(self) -> str:
        lines = [
            f"integrable: {'yes' if self.integrable else 'no'}",
            f"max out-of-span: {self.max_magnitude:.6e} (tolerance {self.tolerance:.1e}, {self.probe_count} probes)",
        ]
        for pr in self.pairs:
            comps = " ".join(
                f"{AXES[k]}={float(np.mean(pr.sticking_out[:, k])):+.6e}" for k in range(DIM)
            )
            lines.append(f"  [X{pr.i + 1},X{pr.j + 1}] out-of-span {pr.max_out_of_span:.3e}; mean sticking-out {comps}")
        return "\n".join(lines)


def _stack(vec) -> np.ndarray:
    return np.stack([np.asarray(c) for c in vec], axis=-1)


def _choose_complement(G: np.ndarray) -> tuple:
    """Coordinate axes completing the generators to a frame, best-conditioned over probes."""
    n, _, k = G.shape
    best, best_score = None, -1.0
    for axes in itertools.combinations(range(DIM), DIM - k):
        E = np.zeros((n, DIM, DIM - k))
        for col, ax in enumerate(axes):
            E[:, ax, col] = 1.0
        score = float(np.min(np.abs(np.linalg.det(np.concatenate([G, E], axis=2)))))
        if score > best_score + 1e-14:
            best, best_score = axes, score
    return best


def frobenius_report(generators, probes=None, tol: float = 1e-8, provider=None) -> IntegrabilityReport:
    """Check whether all brackets [X_i, X_j] stay in span(X_1..X_k) at the probes."""
    gens = list(generators)
    k = len(gens)
    if not 1 <= k <= DIM:
        raise ValueError("a distribution needs between 1 and 4 generators")
    pts = probe_points(1000) if probes is None else np.asarray(probes, dtype=float)
    pairs = list(itertools.combinations(range(k), 2))
    brackets = {pr: lie_bracket(gens[pr[0]], gens[pr[1]], provider) for pr in pairs}
    vals = calc.evaluate_chunked({"gens": list(gens), "br": brackets}, pts)
    G = np.stack([_stack(g) for g in vals["gens"]], axis=2)  # (n, 4, k)
    sv = np.linalg.svd(G, compute_uv=False)
    bad = np.nonzero(sv[:, -1] <= 1e-10 * np.maximum(sv[:, 0], 1e-300))[0]
    if bad.size:
        raise RankDeficient(f"generators are dependent at probe point {tuple(pts[bad[0]])}")
    norms = np.linalg.norm(G, axis=1).max(axis=1)
    scale = 1.0 + norms**2
    pinv = np.linalg.pinv(G)
    complement = _choose_complement(G) if k < DIM else ()
    frame = G
    if complement:
        E = np.zeros((len(pts), DIM, DIM - k))
        for col, ax in enumerate(complement):
            E[:, ax, col] = 1.0
        frame = np.concatenate([G, E], axis=2)
    reports = []
    worst = worst_ratio = 0.0
    for pr in pairs:
        br = _stack(vals["br"][pr])  # (n, 4)
        coef = np.einsum("nkd,nd->nk", pinv, br)
        resid = br - np.einsum("ndk,nk->nd", G, coef)
        out = np.linalg.norm(resid, axis=1)
        ratio = float(np.max(out / scale))
        if complement:
            full = np.linalg.solve(frame, br[..., None])[..., 0]
            sticking = np.einsum("nda,na->nd", frame[:, :, k:], full[:, k:])
        else:
            sticking = np.zeros_like(br)
        m = float(out.max())
        worst = max(worst, m)
        worst_ratio = max(worst_ratio, ratio)
        reports.append(PairReport(pr[0], pr[1], m, sticking, complement))
    return IntegrabilityReport(worst_ratio <= tol, reports, worst, tol, len(pts), complement)


def frobenius_curvature(horizontal, coframe, frame, probes=None, provider=None, tol: float = 1e-10) -> CurvatureForm:
    """Omega = -d(alpha^m) (x) Y_m restricted to the horizontal generators.

    Keys of the result are generator index pairs (i < j).
    """
    gens = list(horizontal)
    alphas = list(coframe)
    Ys = list(frame)
    if len(alphas) != len(Ys):
        raise ValueError("coframe and frame must have equal length")
    pts = probe_points(256, seed=3) if probes is None else probes
    checks = {
        "annihilate": [[pairing(al, X) for X in gens] for al in alphas],
        "dual": [[pairing(al, Yn) for Yn in Ys] for al in alphas],
    }
    vals = calc.evaluate_chunked(checks, pts)
    worst = 0.0
    for row in vals["annihilate"]:
        for v in row:
            worst = max(worst, float(np.max(np.abs(v))))
    for m, row in enumerate(vals["dual"]):
        for n, v in enumerate(row):
            worst = max(worst, float(np.max(np.abs(v - (1.0 if m == n else 0.0)))))
    if not worst <= tol:
        raise PairingViolation(f"coframe/frame duality violated by {worst:.3e}")
    dalphas = [calc.exterior_derivative(al, provider) for al in alphas]
    out = {}
    for i, j in itertools.combinations(range(len(gens)), 2):
        acc = Vector([0.0] * DIM)
        for da, Ym in zip(dalphas, Ys):
            coeff = evaluate_on(da, gens[i], gens[j])
            if calc.is_zero(coeff) or isinstance(coeff, (int, float)) and coeff == 0:
                continue
            acc = acc - Ym * coeff
        out[(i, j)] = acc
    return CurvatureForm(out, labels=tuple(f"X{n + 1}" for n in range(len(gens))))


def curvature_via_brackets(horizontal, coframe, frame, provider=None) -> CurvatureForm:
    """<alpha^m, [X_i, X_j]> Y_m, the bracket form of the same curvature."""
    gens = list(horizontal)
    out = {}
    for i, j in itertools.combinations(range(len(gens)), 2):
        br = lie_bracket(gens[i], gens[j], provider)
        acc = Vector([0.0] * DIM)
        for al, Ym in zip(coframe, frame):
            acc = acc + Ym * pairing(al, br)
        out[(i, j)] = acc
    return CurvatureForm(out, labels=tuple(f"X{n + 1}" for n in range(len(gens))))


def vertical_two_form(P: dict, eps: int) -> Form:
    """V*(dx) ^ V*(dy)."""
    return wedge(P["V*"](dx(0)), P["V*"](dx(1)))
