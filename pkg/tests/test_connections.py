import numpy as np
import pytest

from phlo import calculus as calc
from phlo import connections as cn
from phlo.calculus import XI, Z, FiniteDifference
from phlo.exterior import Tensor11, Vector, coordinate_vector, dx, evaluate_on, sharp
from phlo.model import build_phlo
from phlo.probes import probe_points
from helpers import mx, random_fields, solution, support_points

PTS = probe_points(1000, seed=31)


def entries(T):
    return [[float(np.asarray(v)) if not hasattr(v, "_eval") else v for v in row] for row in T.m]


def test_zero_field_gives_coordinate_projection():
    P = cn.build_projections(0.0, 0.0, 1)
    assert entries(P["V"].tensor) == entries(cn.vertical_identity())


def test_reference_matrix_rows():
    P = cn.build_projections(1.0, 2.0, 1)
    m = entries(P["V"].tensor)
    assert m[0] == [1, 0, -1, -1]
    assert m[1] == [0, 1, -2, -2]


def test_trace_formula():
    a, b = cn.trace_energy(cn.build_projections(1.0, 2.0, 1))
    assert a == 5.0 and b == 5.0


@pytest.mark.parametrize("u, p, eps", random_fields())
def test_projection_algebra(u, p, eps):
    P = cn.build_projections(u, p, eps)
    ident = Tensor11.identity()
    for name in ("V", "H", "Vt", "Ht", "V*", "H*", "Vt*", "Ht*"):
        assert mx(P[name].idempotence_defect(), PTS) <= 1e-12
    assert mx(P["V"].tensor + P["H"].tensor - ident, PTS) == 0.0
    assert mx(P["Vt"].tensor + P["Ht"].tensor - ident, PTS) == 0.0
    assert mx(P["V"].tensor.compose(P["H"].tensor), PTS) <= 1e-12
    a, b = cn.trace_energy(P)
    assert mx([a - (u * u + p * p), b - (u * u + p * p)], PTS) <= 1e-12


def test_not_a_projection_is_rejected():
    bad = cn.ProjectionField(Tensor11.identity() * 2.0, "V")
    with pytest.raises(cn.NotAProjection):
        cn.nijenhuis_self(bad)


def test_cotangent_projection_has_no_nijenhuis():
    P = cn.build_projections(Z, XI, 1)
    with pytest.raises(TypeError):
        cn.nijenhuis_self(P["V*"])


def test_constant_projection_is_flat():
    res = cn.nijenhuis_self(cn.ProjectionField(cn.vertical_identity(), "V"))
    assert mx(res.bracket, PTS) == 0.0


def test_linear_fields_curvature():
    P = cn.build_projections(Z, XI, 1)
    res = cn.nijenhuis_self(P["V"])
    vals = calc.evaluate(res.bracket, PTS[:5])
    for key, vec in vals.values.items():
        want = [1.0, -1.0, 0.0, 0.0] if key == (2, 3) else [0.0] * 4
        for comp, w in zip(vec, want):
            np.testing.assert_array_equal(np.broadcast_to(comp, (5,)), w)
    assert mx(res.vertical, PTS) == 0.0
    cf = cn.curvature_closed_form(Z, XI, 1)
    z1 = calc.evaluate(cf.Z1, PTS[:3])
    z2 = calc.evaluate(cf.Z2, PTS[:3])
    assert [float(np.asarray(c).ravel()[0]) for c in z1] == [1.0, -1.0, 0.0, 0.0]
    assert [float(np.asarray(c).ravel()[0]) for c in z2] == [1.0, 1.0, 0.0, 0.0]


def test_constant_fields_have_no_curvature():
    cf = cn.curvature_closed_form(calc.as_field(1.5), calc.as_field(-2.0), -1)
    assert mx([cf.Z1, cf.Z2, cf.K2], PTS) == 0.0


@pytest.mark.parametrize("u, p, eps", random_fields())
@pytest.mark.parametrize("provider, tol", [(calc.DUAL, 1e-10), (FiniteDifference(1e-5), 1e-6)])
def test_nijenhuis_matches_closed_form(u, p, eps, provider, tol):
    P = cn.build_projections(u, p, eps)
    cf = cn.curvature_closed_form(u, p, eps)
    nV = cn.nijenhuis_self(P["V"], provider)
    nVt = cn.nijenhuis_self(P["Vt"], provider)
    assert mx(nV.bracket - cn.CurvatureForm({(2, 3): cf.Z1}), PTS) <= tol
    assert mx(nVt.bracket - cn.CurvatureForm({(2, 3): cf.Z2}), PTS) <= tol
    assert mx([nV.vertical, nVt.vertical], PTS) <= tol
    assert mx([cn.curvature_modulus(cf.R) - cf.K2, cn.curvature_modulus(cf.Rt) - cf.K2], PTS) <= 1e-12


def test_curvature_vectors_on_solution():
    cfg, sol = solution()
    s = cfg.solution
    f = build_phlo(sol.u, sol.p, s.eps, s.kappa, s.l0)
    cf = cn.curvature_closed_form(sol.u, sol.p, s.eps)
    pts = support_points(cfg, sol)
    kl = s.kappa * s.l0
    assert mx(cf.Z1 * kl - sharp(f.Astar), pts) <= 1e-12
    assert mx(cf.Z2 * kl + sharp(f.A), pts) <= 1e-12


def test_frobenius_verdicts():
    e0, e1 = coordinate_vector(0), coordinate_vector(1)
    flat = cn.frobenius_report([e0, e1], PTS)
    assert flat.integrable and flat.max_magnitude == 0.0
    twisted = cn.frobenius_report([e0, Vector([0.0, calc.X, 1.0, 0.0])], PTS)
    assert not twisted.integrable
    np.testing.assert_allclose(twisted.pairs[0].sticking_out, np.tile([0, 1, 0, 0], (len(PTS), 1)), atol=1e-14)


def test_horizontal_distribution_of_linear_fields():
    H = cn.build_projections(Z, XI, 1)["H"].tensor
    rep = cn.frobenius_report([H.column(2), H.column(3)], PTS)
    assert not rep.integrable
    assert rep.complement == (0, 1)
    np.testing.assert_allclose(rep.pairs[0].sticking_out, np.tile([1, -1, 0, 0], (len(PTS), 1)), atol=1e-12)
    d = rep.to_dict()
    assert d["complement"] == ["x", "y"] and d["integrable"] is False
    assert "integrable: no" in rep.to_text()


def test_frobenius_needs_independent_generators():
    with pytest.raises(cn.RankDeficient):
        cn.frobenius_report([coordinate_vector(0), coordinate_vector(0) * 2.0], PTS[:10])
    with pytest.raises(ValueError):
        cn.frobenius_report([], PTS[:10])


@pytest.mark.parametrize("u, p, eps", random_fields())
def test_frobenius_curvature_equals_bracket_form(u, p, eps):
    P = cn.build_projections(u, p, eps)
    H = P["H"].tensor
    coframe = [P["V*"](dx(0)), P["V*"](dx(1))]
    frame = [coordinate_vector(0), coordinate_vector(1)]
    gens = [H.column(2), H.column(3)]
    omega = cn.frobenius_curvature(gens, coframe, frame, PTS[:64])
    cf = cn.curvature_closed_form(u, p, eps)
    assert mx(omega[(0, 1)] - cf.Z1, PTS) <= 1e-10
    assert mx(omega - cn.curvature_via_brackets(gens, coframe, frame), PTS) <= 1e-10
    K2form = evaluate_on(cn.vertical_two_form(P, eps), cf.Z1, cf.Z2)
    assert mx(K2form - eps * cf.K2, PTS) <= 1e-10


def test_frobenius_curvature_vanishes_for_integrable_distribution():
    gens = [coordinate_vector(0), coordinate_vector(1)]
    omega = cn.frobenius_curvature(gens, [dx(2), dx(3)], [coordinate_vector(2), coordinate_vector(3)])
    assert mx(omega, PTS) == 0.0


def test_frobenius_curvature_checks_pairing():
    with pytest.raises(cn.PairingViolation):
        cn.frobenius_curvature([coordinate_vector(0)], [dx(0)], [coordinate_vector(0)])


def test_l0_examples():
    pt = np.array([[0.0, 0.0, 1.0, 1.0]])
    assert calc.evaluate(cn.l0_field(Z, XI, 1), pt)[0] == pytest.approx(1.0)
    zero = cn.l0_summary(calc.as_field(0.0), calc.as_field(0.0), 1, PTS)
    assert zero.is_undefined and zero.undefined_count == len(PTS)


def test_l0_on_solution():
    cfg, sol = solution()
    s = cfg.solution
    pts = support_points(cfg, sol, rel=0)
    summ = cn.l0_summary(sol.u, sol.p, s.eps, pts)
    assert summ.minimum == pytest.approx(s.l0, rel=1e-6)
    assert summ.maximum == pytest.approx(s.l0, rel=1e-6)


def test_dual_mix_examples():
    u, p = calc.sin(calc.X), calc.cos(calc.Y)
    um, pm = cn.dual_mix(u, p, 1, 1.0, 0.0)
    assert mx([um - u, pm + p], PTS) == 0.0
    um, pm = cn.dual_mix(u, p, 1, 0.0, 1.0)
    assert mx([um - p, pm - u], PTS) == 0.0
    with pytest.raises(ValueError):
        cn.dual_mix(u, p, 1, 0.0, 0.0)


@pytest.mark.parametrize("u, p, eps", random_fields())
def test_dual_mix_scales_energy_and_keeps_l0(u, p, eps):
    rng = np.random.default_rng(5)
    for a, b in rng.normal(size=(20, 2)):
        um, pm = cn.dual_mix(u, p, eps, float(a), float(b))
        s = a * a + b * b
        P = cn.build_projections(um, pm, eps)
        assert mx(cn.trace_energy(P)[0] - s * (u * u + p * p), PTS) <= 1e-10 * max(1.0, s)
        ratio = calc.evaluate(cn.l0_squared(um, pm, eps) / cn.l0_squared(u, p, eps), PTS)
        np.testing.assert_allclose(ratio, 1.0, rtol=1e-10)
