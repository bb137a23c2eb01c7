import numpy as np
import pytest

from canonsym import jets
from canonsym.jets import Jet, jet_arith, jet_derivative, jet_elem, jet_pow, seeds
from canonsym.errors import (
    DivisionByVanishingJet,
    IncompatibleJets,
    OrderExhausted,
)


def rand_jet(rng, nvars=2, order=10, base=(0.3, -0.2)):
    if nvars == 1:
        c = rng.uniform(-1, 1, order + 1) + 1j * rng.uniform(-1, 1, order + 1)
    else:
        c = (rng.uniform(-1, 1, (order + 1, order + 1))
             + 1j * rng.uniform(-1, 1, (order + 1, order + 1)))
    return Jet(nvars, order, base[:nvars], c)


def test_binomial_square():
    (x,) = seeds((0.0,), order=2)
    p = (1 + x) * (1 + x)
    assert np.allclose(p.coeffs, [1, 2, 1])


def test_geometric_series():
    (x,) = seeds((0.0,), order=3)
    g = 1 / (1 - x)
    assert np.allclose(g.coeffs, [1, 1, 1, 1])


def test_sin_times_csc_is_one():
    (x,) = seeds((0.7,), order=8)
    s = jet_elem("sin", x)
    prod = s * s.reciprocal()
    expect = np.zeros(9, dtype=complex)
    expect[0] = 1.0
    assert np.max(np.abs(prod.coeffs - expect)) < 1e-14


def test_sin_maclaurin():
    (x,) = seeds((0.0,), order=3)
    s = jet_elem("sin", x)
    assert np.allclose(s.coeffs, [0, 1, 0, -1 / 6])


def test_exp_of_zero_constant():
    a = Jet.constant(0.0, nvars=1, base=(0.0,), order=7)
    e = jet_elem("exp", a)
    assert e.value == 1.0 and np.max(np.abs(e.coeffs[1:])) == 0.0


def test_cosh_against_finite_differences():
    base = 0.3
    (x,) = seeds((base,), order=6)
    j = jet_elem("cosh", x)
    from math import comb, factorial

    def central(k, h):
        return sum((-1) ** i * comb(k, i) * np.cosh(base + (k / 2 - i) * h)
                   for i in range(k + 1)) / h ** k

    def richardson(k, h, levels=3):
        # central difference is O(h^2); each level cancels the leading term
        vals = [central(k, h / 2 ** m) for m in range(levels + 1)]
        for p in range(1, levels + 1):
            fac = 4.0 ** p
            vals = [(fac * vals[i + 1] - vals[i]) / (fac - 1)
                    for i in range(len(vals) - 1)]
        return vals[0]

    for k in range(1, 5):
        fd = richardson(k, 0.4)
        assert abs(fd - j.coefficient(k) * factorial(k)) < 1e-8 * max(1, abs(fd))


def test_formal_derivative():
    j = Jet(1, 2, (0.0,), [3.0, 5.0, 7.0])
    d = jet_derivative(j)
    assert d.order == 1 and np.allclose(d.coeffs, [5.0, 14.0])


def test_partial2_of_u1_only_jet():
    u1, u2 = seeds((0.4, 0.9), order=5)
    f = u1 * u1 + 2.0
    d = f.derivative(2)
    assert d.norm() == 0.0


def test_derivative_of_sin_is_cos():
    (x,) = seeds((0.4,), order=9)
    lhs = jet_elem("sin", x).derivative()
    rhs = jet_elem("cos", x).truncated(8)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-14


def test_mul_commutative_associative():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b, c = (rand_jet(rng) for _ in range(3))
        ab = a * b
        ba = b * a
        assert np.max(np.abs(ab.coeffs - ba.coeffs)) < 1e-13 * max(ab.norm(), 1)
        lhs = (a * b) * c
        rhs = a * (b * c)
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-13 * max(lhs.norm(), 1)


def test_div_mul_roundtrip():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rand_jet(rng)
        b = rand_jet(rng)
        bc = np.array(b.coeffs)
        bc[0, 0] = 0.5 + 0.2j
        b = Jet(2, b.order, b.base, bc)
        q = a / b
        back = q * b
        scale = max(a.norm(), q.norm(), 1.0)
        assert np.max(np.abs(back.coeffs - a.coeffs)) < 1e-12 * scale


@pytest.mark.parametrize("fn,dfn", [
    ("exp", "exp"), ("sin", "cos"), ("sinh", "cosh"), ("log", None),
])
def test_chain_rule(fn, dfn):
    rng = np.random.default_rng(5)
    a = rand_jet(rng, nvars=2, order=8)
    if fn == "log":
        a = a + 3.0  # keep away from the branch point
    f = jet_elem(fn, a)
    lhs = f.derivative(1)
    if dfn is None:
        fprime = a.reciprocal()
    else:
        fprime = jet_elem(dfn, a)
    rhs = fprime.truncated(7) * a.derivative(1)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * max(rhs.norm(), 1)


def test_incompatible_jets_raise():
    a = Jet.constant(1.0, 1, (0.0,), 4)
    b = Jet.constant(1.0, 1, (0.5,), 4)
    with pytest.raises(IncompatibleJets):
        jet_arith("add", a, b)
    c = Jet.constant(1.0, 1, (0.0,), 3)
    with pytest.raises(IncompatibleJets):
        jet_arith("mul", a, c)


def test_division_floor():
    rng = np.random.default_rng(3)
    a = rand_jet(rng, nvars=1, order=6, base=(0.0,))
    z = a.shifted_zero()
    with pytest.raises(DivisionByVanishingJet):
        jet_arith("div", a, z)


def test_order_exhausted():
    a = Jet.constant(2.0, 1, (0.0,), 0)
    with pytest.raises(OrderExhausted):
        a.derivative()


def test_pow_negative_integer_and_half():
    (x,) = seeds((0.5,), order=6)
    inv2 = jet_pow(1 + x, -2)
    direct = (1 + x).reciprocal() * (1 + x).reciprocal()
    assert np.max(np.abs(inv2.coeffs - direct.coeffs)) < 1e-13
    r = jet_pow(1 + x, 0.5)
    assert np.max(np.abs((r * r).coeffs - (1 + x).coeffs)) < 1e-13


def test_two_var_triangle_storage():
    u1, u2 = seeds((0.0, 0.0), order=3)
    p = (u1 + u2) * (u1 + u2)
    assert p.coefficient(1, 1) == 2.0
    assert p.coefficient(2, 0) == 1.0
    # entries beyond the triangle are not stored
    with pytest.raises(IndexError):
        p.coefficient(3, 1)
