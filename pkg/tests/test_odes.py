import numpy as np
import pytest

from canonsym import fields, odes
from canonsym.errors import (
    ConditionViolated,
    SingularLeadingCoefficient,
    UnknownEquationId,
    UnresolvedSpectrum,
)
from canonsym.fields import ClosedForm1D, Pow, u2, wp_trig_expr
from canonsym.odes import (
    Trajectory,
    cole_hopf_check,
    cole_hopf_seed,
    fd_spectrum,
    fif3_c1,
    fif3_residual,
    get_equation,
    integrate,
    named_residual,
)


def trig_wp_stack(e1, t0, depth=5):
    f = ClosedForm1D(wp_trig_expr(e1))
    j = f.jet1(t0, depth)
    import math
    return [j.coefficient(k) * math.factorial(k) for k in range(depth + 1)]


def test_unknown_id_raises():
    with pytest.raises(UnknownEquationId):
        get_equation("no-such-equation")


def test_weierstrass_trajectory_matches_closed_form():
    e1 = 0.4
    t0 = 0.8
    stack = trig_wp_stack(e1, t0, 3)
    traj = integrate("weierstrass", stack[:3], (t0, 2.0),
                     params={"hbar": 1.0, "a1": 0.0})
    exact = ClosedForm1D(wp_trig_expr(e1))
    worst = 0.0
    for t in np.linspace(t0, 2.0, 15):
        worst = max(worst, abs(traj.state(t)[0] - exact.value(t)))
    assert worst < 1e-8


def test_zero_initial_data_zero_trajectory():
    traj = integrate("weierstrass", [0.0, 0.0, 0.0], (0.0, 1.5),
                     params={"a1": 0.0})
    for t in np.linspace(0, 1.5, 7):
        assert np.max(np.abs(traj.state(t))) < 1e-12


def test_pvi_self_residual():
    traj = integrate("pvi", [0.2, 0.1, -0.1, 0.0], (0.3, 2.8),
                     params={"hbar": 1.0, "beta1": 0.2, "beta2": -0.1})
    assert traj.self_residual() < 1e-7


def test_pvi_excluded_neighborhood():
    with pytest.raises(SingularLeadingCoefficient):
        integrate("pvi", [0.1, 0.0, 0.0, 0.0], (2.9, 3.3))


def test_cond1_linear_U2_exact_zero():
    U2 = ClosedForm1D(1.0 + 2.0 * u2)
    V2 = ClosedForm1D(Pow(fields.sin(u2), -2))
    rep = named_residual("cond1", {"U2": U2, "V2": V2},
                         params={"a4": 0.0},
                         points=np.linspace(0.5, 1.5, 6))
    assert rep.max_abs == 0.0


def test_sys31a_on_elliptic_potential():
    # V = h^2 wp + a1 solves the third-order elliptic equation; the cubic
    # first-integral display then holds with z1 = -3 h a1
    hb, a1, e1 = 1.0, 0.35, 0.4
    t0 = 0.8
    ws = trig_wp_stack(e1, t0, 3)
    stack = [hb ** 2 * ws[0] + a1, hb ** 2 * ws[1], hb ** 2 * ws[2]]
    traj = integrate("weierstrass", stack, (t0, 1.9),
                     params={"hbar": hb, "a1": a1})
    rep = named_residual("sys31a", traj,
                         params={"hbar": hb, "z1": -3 * hb * a1})
    assert rep.max_abs < 1e-8


def test_sys31a_extracted_constant_mode():
    hb, a1, e1 = 1.0, 0.35, 0.4
    ws = trig_wp_stack(e1, 0.8, 3)
    stack = [hb ** 2 * ws[0] + a1, hb ** 2 * ws[1], hb ** 2 * ws[2]]
    traj = integrate("weierstrass", stack, (0.8, 1.9),
                     params={"hbar": hb, "a1": a1})
    rep = named_residual("sys31a", traj, params={"hbar": hb})
    assert rep.spread < 1e-7
    assert abs(np.mean(rep.values) - (-3 * hb * a1)) < 1e-7


def test_chazy_J_conserved_along_horo_nl():
    p = {"hbar": 1.0, "a9": 1.3, "a10": 2.0, "d1": 0.4, "d3": -0.25}
    traj = integrate("horo_nl", [0.2, -0.1, 0.3, 0.05], (0.0, 0.6),
                     params=p)
    rep = named_residual("chazy_J", traj, params=p)
    assert rep.spread < 1e-6


def test_msw_J_conserved_along_msw():
    p = {"alpha": 0.25, "b0": -0.3, "b1": 0.7, "k2": 0.45, "k4": -0.2}
    traj = integrate("msw", [0.3, -0.1, 0.2], (0.0, 0.8), params=p)
    rep = named_residual("msw_J", traj, params=p)
    assert rep.spread < 1e-6


def test_msw_J_requires_zero_cubic_sector():
    p = {"c1": 0.3}
    traj = integrate("msw", [0.1, 0.0, 0.0], (0.0, 0.3), params=p)
    with pytest.raises(ConditionViolated):
        named_residual("msw_J", traj, params=p)


def test_raising_c1_conserved():
    traj = integrate("raising", [0.5, -0.2, 0.3], (0.1, 0.9),
                     params={"c": 1.0})
    rep = named_residual("raising_c1", traj, params={"c": 1.0})
    assert rep.spread < 1e-6


def test_raising_c1_derivative_identity():
    # on an arbitrary (non-solution) function, d/du of the conserved-form
    # bracket equals -(cV+2u)/c times the equation residual
    c = 0.8
    V = ClosedForm1D(0.3 * Pow(u2, 3) - 0.5 * u2 + 0.2)
    import math

    def stack(t, depth):
        j = V.jet1(t, depth)
        return [j.coefficient(k) * math.factorial(k)
                for k in range(depth + 1)]

    eqJ = get_equation("raising_c1")
    eqR = get_equation("raising")
    h = 1e-5
    for t in (0.3, 0.7, 1.1):
        jp = eqJ.residual(t + h, {"V": stack(t + h, 2)}, {"c": c})
        jm = eqJ.residual(t - h, {"V": stack(t - h, 2)}, {"c": c})
        dj = (jp - jm) / (2 * h)
        s = stack(t, 3)
        r = eqR.residual(t, {"V": s}, {"c": c})
        want = -(c * s[0] + 2 * t) / c * r
        assert abs(dj - want) < 1e-6 * max(1.0, abs(want))


def test_bc5_int_conserved_along_bc5():
    p = {"hbar": 1.0, "c1": 0.3}
    traj = integrate("bc5", [0.4, -0.15, 0.2, 0.1, -0.05], (0.0, 0.7),
                     params=p)
    rep = named_residual("bc5_int", traj, params=p)
    assert rep.spread < 1e-6


def test_wp_defining_conserved():
    e1 = 0.4
    stack = trig_wp_stack(e1, 0.8, 3)
    traj = integrate("weierstrass", stack[:3], (0.8, 1.9))
    g2, g3 = 12 * e1 ** 2, 8 * e1 ** 3
    rep = named_residual("wp_defining", traj, params={"g2": g2, "g3": g3})
    assert rep.spread < 1e-7
    assert max(abs(v) for v in rep.values) < 1e-7


def test_cole_hopf_trivial():
    traj = integrate("msw", [0.0, 0.0, 0.0], (0.0, 1.0),
                     params={"alpha": 1.0})
    rep = cole_hopf_check(traj, 1.0)
    assert rep.max_rel < 1e-10


def test_cole_hopf_linearizable_trajectory():
    # trajectories seeded on the Riccati manifold stay linearizable
    stack, p = cole_hopf_seed(alpha=0.25, b0=-0.3, p0=0.8, p1=0.5, W0=0.3)
    traj = integrate("msw", stack, (0.0, 0.8), params=p)
    rep = cole_hopf_check(traj, 1.0)
    assert rep.max_rel < 1e-6
    # the fitted linear-equation coefficients recover the seed
    assert abs(rep.fit["p"][1] - 0.5) < 1e-5


def test_cole_hopf_generic_trajectory_fails():
    # generic initial data of the same equation is off the linearizable
    # manifold: the strict degree-(1,2) fit must not absorb it
    p = {"alpha": 0.25, "b0": -0.3, "b1": 0.7, "k2": 0.45, "k4": -0.2}
    traj = integrate("msw", [0.3, -0.1, 0.2], (0.0, 0.8), params=p)
    rep = cole_hopf_check(traj, 1.0)
    assert rep.max_rel > 1e-4


class _FakeTraj:
    """Trajectory stand-in wrapping a smooth non-solution profile."""

    span = (0.0, 0.8)
    tol = 1e-10

    def state(self, t):
        w = np.sin(5 * t) * np.exp(t)
        dw = (5 * np.cos(5 * t) + np.sin(5 * t)) * np.exp(t)
        return np.array([w, dw])


def test_cole_hopf_negative_control():
    rep = cole_hopf_check(_FakeTraj(), 1.0)
    assert rep.max_rel > 1e-3


def test_fd_spectrum_harmonic_oscillator():
    ev = fd_spectrum(lambda x: x ** 2, (-12, 12), 2400, 5)
    for n, e in enumerate(ev):
        assert abs(e - (2 * n + 1)) < 1e-6


def test_fd_spectrum_particle_in_a_box():
    ev = fd_spectrum(lambda x: 0.0, (0, np.pi), 2400, 4)
    for n, e in enumerate(ev, start=1):
        assert abs(e - n ** 2) < 1e-6


def test_fd_spectrum_unresolved():
    with pytest.raises(UnresolvedSpectrum):
        fd_spectrum(lambda x: x ** 2, (-40, 40), 12, 8)


def test_fif3_change_of_variables():
    # V0(y) = u(x), y = hbar x maps the quintic condition onto the scaled
    # canonical fifth-order form, with the linear-term constant rescaled
    rng = np.random.default_rng(8)
    hb, alpha = 1.7, 0.9
    eq = get_equation("bc5")
    p = {"hbar": hb, "c1": complex(fif3_c1(alpha, hb)).real}
    for _ in range(5):
        xstack = rng.uniform(-1, 1, 6)
        x = rng.uniform(0.1, 1.0)
        ystack = [xstack[k] / hb ** k for k in range(6)]
        lhs = hb * eq.residual(hb * x, {"V": ystack}, p)
        rhs = fif3_residual(xstack, alpha)
        assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(rhs))


def test_integrate_rejects_integrals_and_coupled_systems():
    with pytest.raises(ValueError):
        integrate("chazy_J", [0, 0, 0], (0, 1))
    with pytest.raises(ValueError):
        integrate("cond1", [0, 0], (0, 1))


def test_horo_nl_singular_leading():
    p = {"hbar": 1.0, "a9": 1.0, "a10": 0.2, "d1": 0.1, "d3": 0.0}
    with pytest.raises(SingularLeadingCoefficient):
        integrate("horo_nl", [0.1, 0.0, 0.0, 0.0], (0.2, 0.5), params=p)


def test_trajectory_csv():
    traj = integrate("weierstrass", [0.5, 0.1, -0.2], (0.0, 0.5),
                     params={"a1": 0.1})
    csv = traj.to_csv(n=5)
    lines = csv.strip().splitlines()
    assert lines[0] == "u,d0,d1,d2,d3"
    assert len(lines) == 6


def horocyclic_solution(a9=0.3, a10=1.1, d1=0.4, d3=-0.2, hb=1.0,
                        u0=0.6, W0=(0.2, -0.3, 0.15, 0.1)):
    """Solve the fourth-order horocyclic potential equation and assemble
    the matching separation data: V2 = W', U1 = d1 constant, and U2 whose
    derivative is the integrated third condition
    U2' = (-(2 a10 - 2 a9 u) V2 + 2 a9 W - 4 d1 u + 4 d3)/4."""
    from canonsym.fields import Derived1D, OdeField1D
    from canonsym.jets import Jet

    params = {"hbar": hb, "a9": a9, "a10": a10, "d1": d1, "d3": d3}
    eq = get_equation("horo_nl")
    p = eq.merged(params)

    def rhs_W(t, ys):
        r0 = eq.residual(t, {"W": list(ys) + [0.0]}, p)
        r1 = eq.residual(t, {"W": list(ys) + [1.0]}, p)
        return -r0 / (r1 - r0)

    Wfn = OdeField1D(4, rhs_W, u0, list(W0), name="W")
    V2fn = Derived1D(Wfn, 1)

    def rhs_U2(t, ys):
        if isinstance(t, Jet):
            w = Wfn.jet1(t.value, t.order)
            w1 = V2fn.jet1(t.value, t.order)
            tt = t
        else:
            w, w1, tt = Wfn.value(t), V2fn.value(t), t
        return 0.25 * (-(2 * a10 - 2 * a9 * tt) * w1 + 2 * a9 * w
                       - 4 * d1 * tt + 4 * d3)

    U2fn = OdeField1D(1, rhs_U2, u0, [0.0], name="U2")
    return Wfn, V2fn, U2fn, params


def test_hcond4_positive_control():
    """Along solutions of the fourth-order equation, the fourth horocyclic
    determining condition vanishes with its flagged term read as
    -4 hbar^2 (a9 + a8 u) V2''; the dropped-term variant does not."""
    from canonsym.fields import Const
    _, V2fn, U2fn, p = horocyclic_solution()
    fns = {"V2": V2fn, "U1": ClosedForm1D(Const(p["d1"])), "U2": U2fn}
    hp = {"a9": p["a9"], "a10": p["a10"], "hbar": p["hbar"]}
    pts = np.linspace(0.4, 0.8, 6)
    good = named_residual("hcond4", fns, hp, points=pts)
    assert good.max_abs < 1e-9
    bad = named_residual("hcond4_noflag", fns, hp, points=pts)
    assert bad.max_abs > 1e-2


def test_hcond123_hold_on_solution():
    from canonsym.fields import Const
    _, V2fn, U2fn, p = horocyclic_solution()
    U1 = ClosedForm1D(Const(p["d1"]))
    pts = np.linspace(0.4, 0.8, 5)
    r1 = named_residual("hcond1", {"U1": U1, "V2": V2fn}, None, points=pts)
    assert r1.max_abs < 1e-12
    r2 = named_residual("hcond2", {"V2": V2fn, "U1": U1}, None, points=pts)
    assert r2.max_abs < 1e-12
    r3 = named_residual("hcond3", {"U2": U2fn, "V2": V2fn, "U1": U1},
                        {"a9": p["a9"], "a10": p["a10"]}, points=pts)
    assert r3.max_abs < 1e-9
