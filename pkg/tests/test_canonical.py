import numpy as np
import pytest

from canonsym import fields
from canonsym.canonical import (
    CanonicalSystem,
    HLPoly,
    abc_from_fg,
    assemble_and_verify,
    commutation_report,
    det3_printed,
    det3_residuals,
    fg_polys,
    integrability_residuals,
    master_equations,
    reconstruct_D,
)
from canonsym.errors import IntegrabilityViolated
from canonsym.fields import Pow, ScalarField, cos, cosh, exp, sin, tan, u1, u2


def polar_system(V2=None):
    if V2 is None:
        V2 = ScalarField(3 * Pow(sin(u2), -2))
    return CanonicalSystem(f1=ScalarField(exp(2 * u1)), f2=0.0, V1=0.0,
                           V2=V2, hbar=1.0,
                           safe_domain={"u1": (-0.5, 0.5), "u2": (0.4, 1.2)},
                           label="polar")


def system25(hb=1.0):
    return CanonicalSystem(f1=ScalarField(Pow(cosh(u1), -2)), f2=0.0,
                           V1=0.0,
                           V2=ScalarField(4 * hb ** 2 * Pow(cos(2 * u2), -2)),
                           hbar=hb,
                           safe_domain={"u1": (-0.6, 0.6), "u2": (0.2, 0.6)},
                           label="s25")


def rand_field(rng, du1=2, du2=4):
    e = fields.Const(0)
    for i in range(du1 + 1):
        for j in range(du2 + 1):
            e = e + rng.uniform(-1, 1) * Pow(u1, i) * Pow(u2, j)
    return ScalarField(e)


def test_build_HL_sphere_coefficients():
    sys = system25()
    H, L = sys.build_HL()
    at = (0.3, 0.4)
    # H second-derivative weights are -h^2/2 cosh^2(u1) (f2 = 0)
    want = -0.5 * np.cosh(0.3) ** 2
    assert abs(H.terms[(2, 0)].value(at) - want) < 1e-12
    assert abs(H.terms[(0, 2)].value(at) - want) < 1e-12
    # L = f2/(f1+f2)(...) - f1/(f1+f2)(...) reduces to -(-h^2/2 d22 + V2)
    assert (2, 0) not in L.terms
    assert abs(L.terms[(0, 2)].value(at) - 0.5) < 1e-12
    v2 = 4 / np.cos(0.8) ** 2
    assert abs(L.terms[(0, 0)].value(at) + v2) < 1e-12


def test_build_HL_flat_trivial():
    sys = CanonicalSystem(f1=1.0, f2=0.0, V1=0.0, V2=0.0, hbar=1.0,
                          safe_domain={"u1": (-1, 1), "u2": (-1, 1)})
    H, L = sys.build_HL()
    at = (0.1, 0.2)
    assert abs(H.terms[(2, 0)].value(at) + 0.5) < 1e-15
    assert abs(H.terms[(0, 2)].value(at) + 0.5) < 1e-15
    assert abs(L.terms[(0, 2)].value(at) - 0.5) < 1e-15


def test_polar_commutation():
    rep = commutation_report(polar_system(), order=8)
    assert rep.max_rel < 1e-12


def test_sphere_commutation():
    rep = commutation_report(system25(), order=8)
    assert rep.max_rel < 1e-12


def test_abc_structural_identity():
    # d11 A + d22 A - 2 d2 B - 2 d1 C = 0 for any (F, G)
    rng = np.random.default_rng(21)
    F, G = fg_polys(rand_field(rng), rand_field(rng), rand_field(rng),
                    rand_field(rng))
    A, B, C = abc_from_fg(F, G)
    resid = A.d(1).d(1) + A.d(2).d(2) - 2.0 * B.d(2) - 2.0 * C.d(1)
    for jk in resid.support():
        for pt in [(0.3, 0.8), (-0.2, 1.1)]:
            assert abs(resid.value(jk, pt)) < 1e-12


def test_abc_simple_case():
    F, G = fg_polys(0.0, ScalarField(u1))
    A, B, C = abc_from_fg(F, G)
    at = (0.4, 0.9)
    assert abs(B.value((0, 0), at) - 1.0) < 1e-15
    assert abs(C.value((0, 0), at)) < 1e-15
    assert not A.terms


def test_master_components_match_printed_equations():
    """The nine displayed determining equations agree with the (H, L) power
    expansion of the two master equations, up to terms that are derivatives
    of the two harmonicity equations."""
    rng = np.random.default_rng(7)
    sys = polar_system(V2=ScalarField(2 * Pow(u2, -2) + u2))
    h2 = sys.hbar ** 2
    for _ in range(3):
        F0, G0, GH, GL = (rand_field(rng) for _ in range(4))
        F, G = fg_polys(F0, G0, GH, GL)
        eq1, eq2 = master_equations(sys, F, G)
        p = det3_printed(sys, F0, G0, GH, GL)
        tF = F0.derivative(1).derivative(1) + F0.derivative(2).derivative(2)
        tG = GL.derivative(1).derivative(1) + GL.derivative(2).derivative(2)

        def d(f, *axes):
            for a in axes:
                f = f.derivative(a)
            return f

        checks = [
            (eq1.coeff(0, 0), -0.5 * p["p1"] + 0.25 * h2 * (d(tF, 2, 2)
                                                            - d(tF, 1, 1))),
            (eq1.coeff(0, 1), -2.0 * p["p2"] + h2 * d(tG, 1, 2)),
            (eq1.coeff(1, 0), -p["p3"]),
            (eq2.coeff(0, 0), -p["p4"] + 0.25 * h2 * d(tF, 1, 2)),
            (eq2.coeff(0, 1), -p["p5"] + 0.25 * h2 * (d(tG, 1, 1)
                                                      - d(tG, 2, 2))),
            (eq2.coeff(0, 2), 2.0 * p["p6"]),
            (eq2.coeff(1, 0), -p["p7"]),
            (eq2.coeff(1, 1), -p["p8"]),
            (eq2.coeff(2, 0), -p["p9"]),
        ]
        for got, want in checks:
            for pt in [(0.2, 0.7), (-0.3, 1.0)]:
                a, b = got.value(pt), want.value(pt)
                assert abs(a - b) < 1e-9 * max(1.0, abs(a), abs(b))


def test_zero_ansatz_residuals():
    sys = system25()
    pts = sys.sample_points(4, seed=3)
    rep = det3_residuals(sys, 0.0, 0.0, 0.0, 0.0, pts)
    assert rep.max_abs == 0.0
    F, G = fg_polys(0.0)
    assert integrability_residuals(sys, F, G, pts).max_abs == 0.0


def s25_ansatz(hb=1.0):
    F0 = ScalarField(fields.Const(0))
    G0 = ScalarField(-2j * hb ** 3 * tan(2 * u2) + 4j * hb ** 3 * u2)
    GH = ScalarField(fields.Const(0))
    GL = ScalarField(2j * hb * u2)
    return F0, G0, GH, GL


def test_s25_third_order_symmetry_passes_det3():
    sys = system25()
    pts = sys.sample_points(6, seed=3)
    rep = det3_residuals(sys, *s25_ansatz(), pts)
    assert rep.max_abs < 1e-10


def test_negative_control_random_ansatz():
    sys = system25()
    rng = np.random.default_rng(17)
    pts = sys.sample_points(4, seed=3)
    rep = det3_residuals(sys, rand_field(rng), rand_field(rng),
                         rand_field(rng), rand_field(rng), pts)
    assert rep.max_abs > 1e-2


def test_s25_assemble_and_verify():
    sys = system25()
    pts = sys.sample_points(4, seed=3)
    F, G = fg_polys(*s25_ansatz())
    T, rep = assemble_and_verify(sys, F, G, points=pts, order=10)
    assert rep.max_rel < 1e-10


def test_reconstruct_D_zero():
    sys = system25()
    F, G = fg_polys(0.0)
    comps = reconstruct_D(sys, F, G)
    assert comps == {}


def test_reconstruct_D_integrability_violation():
    sys = system25()
    rng = np.random.default_rng(5)
    F, G = fg_polys(rand_field(rng), rand_field(rng))
    comps = reconstruct_D(sys, F, G)
    with pytest.raises(IntegrabilityViolated):
        for jk, c in comps.items():
            c.jet((0.3, 0.4), 4)


def test_report_csv():
    sys = system25()
    rep = commutation_report(sys, points=sys.sample_points(2, seed=0))
    csv = rep.to_csv()
    assert csv.startswith("point,equation,abs_residual,rel_residual")
    assert len(csv.strip().splitlines()) == 3


def test_system_json_roundtrip():
    sys = system25()
    blob = {
        "id": "s25",
        "f1": sys.f1.to_json(),
        "f2": sys.f2.to_json(),
        "V1": sys.V1.to_json(),
        "V2": sys.V2.to_json(),
        "hbar": [1.0, 0.0],
        "safe_domain": {k: list(v) for k, v in sys.safe_domain.items()},
    }
    back = CanonicalSystem.from_json(blob)
    assert commutation_report(back).max_rel < 1e-12


def test_horocyclic_nonlinear_ansatz_passes_det3():
    """Positive control on the weight f1 = 1/u1^2: the separable system
    whose angular potential solves the fourth-order nonlinear equation
    carries a 3rd-order symmetry with F0 = 0, G0 = d1 u1^2/2 + U2(u2),
    GH = 0, GL = a9 u1^2/2 - a9 u2^2/2 + a10 u2."""
    from canonsym.fields import Func1, Var
    from test_odes import horocyclic_solution

    _, V2fn, U2fn, p = horocyclic_solution()
    a9, a10, d1 = p["a9"], p["a10"], p["d1"]
    V2 = ScalarField(Func1(V2fn, Var("u2"), name="V2"))
    U2 = ScalarField(Func1(U2fn, Var("u2"), name="U2"))
    sys = CanonicalSystem(f1=ScalarField(Pow(u1, -2)), f2=0.0, V1=0.0,
                          V2=V2, hbar=p["hbar"],
                          safe_domain={"u1": (0.5, 1.5), "u2": (0.4, 0.8)},
                          label="horocyclic-nonlinear")
    G0 = 0.5 * d1 * ScalarField(Pow(u1, 2)) + U2
    GL = ScalarField(0.5 * a9 * Pow(u1, 2) - 0.5 * a9 * Pow(u2, 2)
                     + a10 * u2)
    pts = sys.sample_points(5, seed=3)
    rep = det3_residuals(sys, 0.0, G0, 0.0, GL, pts)
    assert rep.max_abs < 1e-9
