"""Separable canonical form and its symmetry determining equations.

The Hamiltonian is

    H = (f1(u1) + f2(u2))^-1 (-h^2/2 d11 - h^2/2 d22 + V1(u1) + V2(u2))

with the separation symmetry

    L = f2/(f1+f2) (-h^2/2 d11 + V1) - f1/(f1+f2) (-h^2/2 d22 + V2).

A higher symmetry candidate is written as

    Lt = A d12 - B d1 - C d2 + D

with A, B, C, D polynomial in the commuting parameters (H, L) whose
coefficients are fields of (u1, u2); it is generated from two functions
F, G via A = F, B = F_2/2 + G_1, C = F_1/2 - G_2.  The condition
[H, Lt] = 0 reduces to two master equations whose coefficients of each
H^j L^k power must vanish; at operator order 3 these are nine scalar
equations.  Everything here is evaluated numerically through jets.
"""

from __future__ import annotations

import numpy as np

from .diffop import DiffOp, OpJet, OpPoly
from .errors import IntegrabilityViolated, OutOfDomain
from .fields import ScalarField, as_expr
from .jets import Jet


class ResidualReport:
    """Per-point, per-equation residual table with max statistics."""

    def __init__(self, scale=1.0):
        self.rows = []  # (point, equation id, abs residual)
        self.scale = max(float(scale), 1e-300)

    def add(self, point, eq_id, value):
        self.rows.append((tuple(point), str(eq_id), abs(complex(value))))

    def merge(self, other):
        self.rows.extend(other.rows)
        self.scale = max(self.scale, other.scale)
        return self

    @property
    def max_abs(self):
        return max((r[2] for r in self.rows), default=0.0)

    @property
    def max_rel(self):
        return self.max_abs / self.scale

    def passed(self, tol, relative=False):
        return (self.max_rel if relative else self.max_abs) < tol

    def by_equation(self):
        out = {}
        for _, eq, v in self.rows:
            out[eq] = max(out.get(eq, 0.0), v)
        return out

    def to_csv(self):
        lines = ["point,equation,abs_residual,rel_residual"]
        for pt, eq, v in self.rows:
            pts = ";".join(f"{complex(c).real:.17g}" for c in pt)
            lines.append(f"{pts},{eq},{v:.17g},{v / self.scale:.17g}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"ResidualReport(rows={len(self.rows)}, "
                f"max_abs={self.max_abs:.3e})")


class CanonicalSystem:
    """Separable system data: conformal factors f1(u1), f2(u2), separated
    potentials V1(u1), V2(u2), Planck constant, and a safe sampling box."""

    def __init__(self, f1, f2, V1, V2, hbar, safe_domain, label="",
                 check_points=7):
        self.f1 = _field(f1)
        self.f2 = _field(f2)
        self.V1 = _field(V1)
        self.V2 = _field(V2)
        self.hbar = complex(hbar)
        self.safe_domain = dict(safe_domain)
        self.label = label
        for pt in self.sample_points(check_points, seed=0):
            w = self.f1.value(pt) + self.f2.value(pt)
            if abs(w) < 1e-10:
                raise OutOfDomain(
                    f"{label}: f1+f2 vanishes at sample point {pt}")

    def sample_points(self, n, seed=0):
        """Deterministic quasi-uniform points in the safe box."""
        (a1, b1) = self.safe_domain["u1"]
        (a2, b2) = self.safe_domain["u2"]
        rng = np.random.default_rng(seed)
        pts = []
        for _ in range(n):
            t1, t2 = rng.uniform(0.08, 0.92, 2)
            pts.append((a1 + t1 * (b1 - a1), a2 + t2 * (b2 - a2)))
        return pts

    @property
    def weight(self):
        return self.f1 + self.f2

    def build_HL(self):
        """The Hamiltonian and the separation symmetry as DiffOps."""
        c = -self.hbar ** 2 / 2
        w = self.weight
        H = DiffOp({(2, 0): ScalarField(as_expr(c) / w.expr),
                    (0, 2): ScalarField(as_expr(c) / w.expr),
                    (0, 0): (self.V1 + self.V2) / w})
        L = DiffOp({(2, 0): self.f2 * c / w,
                    (0, 2): -self.f1 * c / w,
                    (0, 0): (self.f2 * self.V1 - self.f1 * self.V2) / w})
        return H, L

    @classmethod
    def from_json(cls, blob, func1_registry=None):
        return cls(
            f1=ScalarField.from_json(blob["f1"], func1_registry=func1_registry),
            f2=ScalarField.from_json(blob["f2"], func1_registry=func1_registry),
            V1=ScalarField.from_json(blob["V1"], func1_registry=func1_registry),
            V2=ScalarField.from_json(blob["V2"], func1_registry=func1_registry),
            hbar=complex(blob["hbar"][0], blob["hbar"][1]),
            safe_domain={k: tuple(v) for k, v in blob["safe_domain"].items()},
            label=blob.get("id", ""))


def _field(x):
    if isinstance(x, ScalarField):
        return x
    return ScalarField(as_expr(x))


class HLPoly:
    """Polynomial in the commuting parameters (H, L) whose coefficients are
    ScalarFields of (u1, u2): sum_{j,k} coeff_{jk} H^j L^k."""

    def __init__(self, terms):
        self.terms = {}
        for (j, k), c in terms.items():
            c = _field(c)
            if not c.is_zero():
                self.terms[(int(j), int(k))] = c

    @classmethod
    def of(cls, field):
        return cls({(0, 0): field})

    def coeff(self, j, k):
        return self.terms.get((j, k), ScalarField(as_expr(0)))

    def __add__(self, other):
        if not isinstance(other, HLPoly):
            other = HLPoly.of(_field(other))
        merged = dict(self.terms)
        for jk, c in other.terms.items():
            merged[jk] = merged[jk] + c if jk in merged else c
        return HLPoly(merged)

    __radd__ = __add__

    def __neg__(self):
        return HLPoly({jk: -c for jk, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, HLPoly):
            other = HLPoly.of(_field(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HLPoly):
            out = {}
            for (j1, k1), c1 in self.terms.items():
                for (j2, k2), c2 in other.terms.items():
                    jk = (j1 + j2, k1 + k2)
                    p = c1 * c2
                    out[jk] = out[jk] + p if jk in out else p
            return HLPoly(out)
        return HLPoly({jk: c * other for jk, c in self.terms.items()})

    __rmul__ = __mul__

    def d(self, var):
        return HLPoly({jk: c.derivative(var)
                       for jk, c in self.terms.items()})

    def support(self):
        return sorted(self.terms)

    def value(self, jk, point):
        c = self.terms.get(jk)
        return 0j if c is None else c.value(point)


def fg_polys(F0, G0=None, GH=None, GL=None):
    """Package a 3rd-order ansatz into the (F, G) HLPoly pair."""
    F = HLPoly({(0, 0): _field(F0)})
    gterms = {}
    if G0 is not None:
        gterms[(0, 0)] = _field(G0)
    if GH is not None:
        gterms[(1, 0)] = _field(GH)
    if GL is not None:
        gterms[(0, 1)] = _field(GL)
    return F, HLPoly(gterms)


def abc_from_fg(F, G):
    """A = F, B = F_2/2 + G_1, C = F_1/2 - G_2 (component-wise in H, L)."""
    if not isinstance(F, HLPoly):
        F = HLPoly.of(_field(F))
    if not isinstance(G, HLPoly):
        G = HLPoly.of(_field(G))
    A = F
    B = 0.5 * F.d(2) + G.d(1)
    C = 0.5 * F.d(1) - G.d(2)
    return A, B, C


def _hl_factors(sys):
    """The recurring multiplier polynomials in the master equations."""
    V1, V2, f1, f2 = sys.V1, sys.V2, sys.f1, sys.f2
    m1 = HLPoly({(0, 0): V1, (1, 0): -f1, (0, 1): -1.0})   # V1 - f1 H - L
    m2 = HLPoly({(0, 0): V2, (1, 0): -f2, (0, 1): 1.0})    # V2 - f2 H + L
    d1 = HLPoly({(0, 0): V1.derivative("u1"),
                 (1, 0): -f1.derivative("u1")})            # V1' - f1' H
    d2 = HLPoly({(0, 0): V2.derivative("u2"),
                 (1, 0): -f2.derivative("u2")})            # V2' - f2' H
    dd1 = HLPoly({(0, 0): V1.derivative("u1").derivative("u1"),
                  (1, 0): -f1.derivative("u1").derivative("u1")})
    dd2 = HLPoly({(0, 0): V2.derivative("u2").derivative("u2"),
                  (1, 0): -f2.derivative("u2").derivative("u2")})
    return m1, m2, d1, d2, dd1, dd2


def master_equations(sys, F, G):
    """The two integrability conditions for the gradient of D, as HLPolys
    whose every (j, k) coefficient must vanish for a symmetry."""
    h2 = sys.hbar ** 2
    m1, m2, d1, d2, dd1, dd2 = _hl_factors(sys)

    F1, F2 = F.d(1), F.d(2)
    F11, F22 = F1.d(1), F2.d(2)
    G1, G2 = G.d(1), G.d(2)

    lhs1 = (h2 * G1.d(2).d(2).d(2) + 0.25 * h2 * F2.d(2).d(2).d(2)
            - 2.0 * (F22 * m2) - 3.0 * (F2 * d2) - F * dd2)
    rhs1 = (-h2 * G1.d(1).d(1).d(2) + 0.25 * h2 * F1.d(1).d(1).d(1)
            - 2.0 * (F11 * m1) - 3.0 * (F1 * d1) - F * dd1)
    eq1 = lhs1 - rhs1

    n1 = HLPoly({(0, 0): sys.V1, (1, 0): -sys.f1})   # V1 - f1 H
    n2 = HLPoly({(0, 0): sys.V2, (1, 0): -sys.f2})   # V2 - f2 H
    F12 = F1.d(2)
    lhs2 = (0.25 * h2 * F11.d(1).d(2) - 2.0 * (F12 * n1) - F1 * d2
            + 0.25 * h2 * G1.d(1).d(1).d(1) - 2.0 * (G1.d(1) * m1)
            - G1 * d1)
    rhs2 = (-0.25 * h2 * F12.d(2).d(2) + 2.0 * (F12 * n2) + F2 * d1
            + 0.25 * h2 * G2.d(2).d(2).d(2) - 2.0 * (G2.d(2) * m2)
            - G2 * d2)
    eq2 = lhs2 - rhs2
    return eq1, eq2


def integrability_residuals(sys, F, G, points):
    """Residuals of both master equations, per (H, L) power, per point."""
    eq1, eq2 = master_equations(sys, F, G)
    scale = _fg_scale(sys, F, G, points)
    report = ResidualReport(scale=scale)
    for name, eq in (("eq1", eq1), ("eq2", eq2)):
        for jk in eq.support():
            for pt in points:
                report.add(pt, f"{name}[H^{jk[0]} L^{jk[1]}]",
                           eq.value(jk, pt))
    return report


def _fg_scale(sys, F, G, points):
    vals = [1.0]
    for poly in (F, G):
        for c in poly.terms.values():
            for pt in points:
                vals.append(abs(c.value(pt)))
    return max(vals)


def det3_residuals(sys, F0, G0, GH, GL, points):
    """The nine 3rd-order determining equations (three from the first
    master equation, six from the second), via the (H, L) power expansion."""
    F, G = fg_polys(F0, G0, GH, GL)
    eq1, eq2 = master_equations(sys, F, G)
    scale = _fg_scale(sys, F, G, points)
    report = ResidualReport(scale=scale)
    labels1 = {(0, 0): "det1", (0, 1): "det2", (1, 0): "det3"}
    labels2 = {(0, 0): "det4", (0, 1): "det5", (0, 2): "det6",
               (1, 0): "det7", (1, 1): "det8", (2, 0): "det9"}
    for jk in sorted(set(eq1.support()) | set(labels1)):
        name = labels1.get(jk, f"eq1[{jk}]")
        for pt in points:
            report.add(pt, name, eq1.value(jk, pt))
    for jk in sorted(set(eq2.support()) | set(labels2)):
        name = labels2.get(jk, f"eq2[{jk}]")
        for pt in points:
            report.add(pt, name, eq2.value(jk, pt))
    return report


def det3_printed(sys, F0, G0, GH, GL):
    """The nine equations in their displayed form; returns {name: field}.
    Used to cross-validate the master-equation expansion."""
    h2 = sys.hbar ** 2
    V1, V2, f1, f2 = sys.V1, sys.V2, sys.f1, sys.f2
    V1p, V2p = V1.derivative("u1"), V2.derivative("u2")
    V1pp, V2pp = V1p.derivative("u1"), V2p.derivative("u2")
    f1p, f2p = f1.derivative("u1"), f2.derivative("u2")
    f1pp, f2pp = f1p.derivative("u1"), f2p.derivative("u2")

    def dd(f, *axes):
        for a in axes:
            f = f.derivative(a)
        return f

    F0 = _field(F0)
    G0 = _field(G0)
    GH = _field(GH)
    GL = _field(GL)
    eqs = {}
    eqs["p1"] = (-6.0 * V1p * dd(F0, 1) + 6.0 * V2p * dd(F0, 2)
                 - 4.0 * V1 * dd(F0, 1, 1) + 4.0 * V2 * dd(F0, 2, 2)
                 - 2.0 * h2 * dd(G0, 1, 1, 1, 2) - 2.0 * h2 * dd(G0, 1, 2, 2, 2)
                 + 2.0 * F0 * V2pp - 2.0 * F0 * V1pp)
    eqs["p2"] = dd(F0, 1, 1) + dd(F0, 2, 2)
    eqs["p3"] = (-h2 * dd(GH, 1, 1, 1, 2) - h2 * dd(GH, 1, 2, 2, 2)
                 + 3.0 * f1p * dd(F0, 1) - 3.0 * f2p * dd(F0, 2)
                 + 2.0 * f1 * dd(F0, 1, 1) - 2.0 * f2 * dd(F0, 2, 2)
                 - F0 * f2pp + F0 * f1pp)
    eqs["p4"] = (V2p * dd(F0, 1) + V1p * dd(F0, 2) + V1p * dd(G0, 1)
                 - V2p * dd(G0, 2) + 2.0 * dd(F0, 1, 2) * V2
                 + 2.0 * dd(F0, 1, 2) * V1 + 2.0 * V1 * dd(G0, 1, 1)
                 - 2.0 * V2 * dd(G0, 2, 2)
                 - 0.25 * h2 * dd(G0, 1, 1, 1, 1)
                 + 0.25 * h2 * dd(G0, 2, 2, 2, 2))
    eqs["p5"] = (V1p * dd(GL, 1) - V2p * dd(GL, 2) + 2.0 * V1 * dd(GL, 1, 1)
                 - 2.0 * dd(G0, 1, 1) - 2.0 * V2 * dd(GL, 2, 2)
                 - 2.0 * dd(G0, 2, 2))
    eqs["p6"] = dd(GL, 1, 1) + dd(GL, 2, 2)
    eqs["p7"] = (-f2p * dd(F0, 1) - f1p * dd(F0, 2) + V1p * dd(GH, 1)
                 - f1p * dd(G0, 1) - V2p * dd(GH, 2) + f2p * dd(G0, 2)
                 - 2.0 * dd(F0, 1, 2) * f2 - 2.0 * dd(F0, 1, 2) * f1
                 + 2.0 * V1 * dd(GH, 1, 1) - 2.0 * f1 * dd(G0, 1, 1)
                 - 2.0 * V2 * dd(GH, 2, 2) + 2.0 * f2 * dd(G0, 2, 2)
                 - 0.25 * h2 * dd(GH, 1, 1, 1, 1)
                 + 0.25 * h2 * dd(GH, 2, 2, 2, 2))
    eqs["p8"] = (-f1p * dd(GL, 1) + f2p * dd(GL, 2) + 2.0 * f2 * dd(GL, 2, 2)
                 - 2.0 * f1 * dd(GL, 1, 1) - 2.0 * dd(GH, 1, 1)
                 - 2.0 * dd(GH, 2, 2))
    eqs["p9"] = (-f1p * dd(GH, 1) + f2p * dd(GH, 2) + 2.0 * f2 * dd(GH, 2, 2)
                 - 2.0 * f1 * dd(GH, 1, 1))
    return eqs


class JetField(ScalarField):
    """A field known only through a per-point jet callback (used for the
    reconstructed zeroth-order coefficient D)."""

    def __init__(self, jet_fn):
        self._jet_fn = jet_fn
        self.domain = {}

    def jet(self, point, order, vars=None):
        return self._jet_fn(tuple(point), order)

    def value(self, point, vars=None):
        return self.jet(tuple(point), 0).value

    def is_zero(self):
        return False

    def derivative(self, var):
        raise NotImplementedError("jet-defined fields are not closed-form")


def d_gradient_polys(sys, F, G):
    """The HLPolys for dD/du1 and dD/du2 implied by the two defining
    equations for the gradient of D."""
    h2 = sys.hbar ** 2
    A, B, C = abc_from_fg(F, G)
    A1, A2 = A.d(1), A.d(2)
    lapB = B.d(1).d(1) + B.d(2).d(2)
    lapC = C.d(1).d(1) + C.d(2).d(2)
    V1p = sys.V1.derivative("u1")
    V2p = sys.V2.derivative("u2")
    f1p = sys.f1.derivative("u1")
    f2p = sys.f2.derivative("u2")
    HL_h = HLPoly({(1, 0): 1.0})
    HL_l = HLPoly({(0, 1): 1.0})
    D1 = (1.0 / h2) * (0.5 * h2 * lapB - 2.0 * (A2 * sys.V2)
                       - A * HLPoly.of(V2p)
                       + (2.0 * (A2 * sys.f2) + A * HLPoly.of(f2p)) * HL_h
                       - 2.0 * A2 * HL_l)
    D2 = (1.0 / h2) * (0.5 * h2 * lapC - 2.0 * (A1 * sys.V1)
                       - A * HLPoly.of(V1p)
                       + (2.0 * (A1 * sys.f1) + A * HLPoly.of(f1p)) * HL_h
                       + 2.0 * A1 * HL_l)
    return D1, D2


def reconstruct_D(sys, F, G, tol=1e-7):
    """HLPoly of JetFields for D, each component assembled from the jets of
    its gradient with constant term zero; raises if the mixed partials of
    the two gradient components disagree."""
    D1, D2 = d_gradient_polys(sys, F, G)
    support = sorted(set(D1.support()) | set(D2.support()))
    comps = {}
    for jk in support:
        c1 = D1.coeff(*jk)
        c2 = D2.coeff(*jk)

        def jet_fn(point, order, c1=c1, c2=c2):
            j1 = c1.jet(point, order)
            j2 = c2.jet(point, order)
            mixed = j1.derivative(2) - j2.derivative(1)
            scale = max(j1.norm(), j2.norm(), 1.0)
            if mixed.norm() > tol * scale:
                raise IntegrabilityViolated(
                    f"mixed partials of D differ by {mixed.norm():.3e} "
                    f"at {point}")
            return _potential_jet(j1, j2, order)

        comps[jk] = JetField(jet_fn)
    return comps


def _potential_jet(j1, j2, order):
    """Jet of D from the jets of its two partial derivatives, with zero
    constant term."""
    base = j1.base
    c = np.zeros((order + 1, order + 1), dtype=np.complex128)
    for i in range(min(order, j1.order) + 1):
        for j in range(min(order, j1.order) + 1 - i):
            if i + 1 + j <= order:
                c[i + 1, j] = j1.coefficient(i, j) / (i + 1)
    for j in range(min(order, j2.order) + 1):
        if j + 1 <= order:
            c[0, j + 1] = j2.coefficient(0, j) / (j + 1)
    return Jet(2, order, base, c)


def assemble_operator(sys, F, G, tol=1e-7):
    """OpPoly for the candidate symmetry Lt built from (F, G) with D
    reconstructed from its gradient."""
    A, B, C = abc_from_fg(F, G)
    Dcomps = reconstruct_D(sys, F, G, tol=tol)
    support = sorted(set(A.support()) | set(B.support()) | set(C.support())
                     | set(Dcomps))
    terms = {}
    for jk in support:
        op_terms = {}
        a = A.terms.get(jk)
        if a is not None:
            op_terms[(1, 1)] = a
        b = B.terms.get(jk)
        if b is not None:
            op_terms[(1, 0)] = -b
        c = C.terms.get(jk)
        if c is not None:
            op_terms[(0, 1)] = -c
        d = Dcomps.get(jk)
        if d is not None:
            op_terms[(0, 0)] = d
        if op_terms:
            terms[jk] = DiffOp(op_terms)
    return OpPoly(terms)


def assemble_and_verify(sys, F, G, points=None, order=10, tol=1e-7):
    """Expand the candidate symmetry and report the [H, Lt] commutator
    residual at the sample points."""
    if points is None:
        points = sys.sample_points(8, seed=1)
    H, L = sys.build_HL()
    T = assemble_operator(sys, F, G, tol=tol)
    report = ResidualReport()
    for pt in points:
        Lt = T.expand(H, L, pt, order)
        Hj = H.jet(pt, order)
        comm = Hj.truncated(Lt.order).commutator(Lt)
        report.scale = max(report.scale, Lt.norm() * Hj.norm())
        report.add(pt, "[H,Lt]", comm.norm())
    return T, report


def commutation_report(sys, points=None, order=8):
    """[H, L] residual report for the separable pair itself."""
    if points is None:
        points = sys.sample_points(10, seed=2)
    H, L = sys.build_HL()
    report = ResidualReport()
    for pt in points:
        Hj = H.jet(pt, order)
        Lj = L.jet(pt, order)
        comm = Hj.commutator(Lj)
        report.scale = max(report.scale, Hj.norm() * Lj.norm())
        report.add(pt, "[H,L]", comm.norm())
    return report
