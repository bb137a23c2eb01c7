"""Commuting pairs of one-dimensional operators and their spectral curves.

A second-order operator  A = -(hbar^2/2) d^2 + V0(y)  can admit a commuting
operator B of odd order (3 or 5) when the potential satisfies a nonlinear
condition ("bc3" / "bc5" in the named-equation table).  Commuting pairs obey
a polynomial relation P(A, B) = 0; on common eigenfunctions this becomes an
algebraic curve P(lambda, mu) = 0, and eliminating derivatives between
(A - lambda) g = 0 and (B - mu) g = 0 reduces the eigenfunctions to a single
quadrature.

Everything is certified numerically on coefficient jets at sample base
points; curve coefficients that are not known in closed form are fitted by
least squares and tagged with "fitted" provenance.
"""

from __future__ import annotations

import json

import numpy as np

from . import odes
from .canonical import ResidualReport
from .diffop import DiffOp, op_apply, word_jet
from .errors import (
    ConditionViolated,
    RankDeficientFit,
    ResonantLambda,
)
from .fields import Func1, ScalarField, as_expr, exp, quadrature_field, u2

_SCALARS = (int, float, complex, np.integer, np.floating, np.complexfloating)


def _as_field(x):
    if isinstance(x, ScalarField):
        return x
    return ScalarField(as_expr(x))


class Fn1Field:
    """One-variable adapter (value / jet1 / derivative) over a ScalarField
    evaluated along its single coordinate."""

    def __init__(self, field):
        self.field = field

    def value(self, t):
        return self.field.value((t,))

    def jet1(self, t, order):
        return self.field.jet((float(np.real(t)),), order)

    def derivative(self):
        return Fn1Field(self.field.derivative(2))


def _default_points(V0, points):
    if points is not None:
        return [float(t) for t in points]
    dom = V0.domain.get("u2") if isinstance(V0, ScalarField) else None
    if dom is not None:
        lo, hi = dom
        pad = 0.05 * (hi - lo)
        return list(np.linspace(lo + pad, hi - pad, 5))
    return list(np.linspace(0.3, 0.9, 5))


def _check_condition(eq_id, V0, params, points, tol):
    rep = odes.named_residual(eq_id, Fn1Field(V0), params=params,
                              points=points)
    if rep.max_rel > tol:
        raise ConditionViolated(
            f"potential violates {eq_id}: relative residual "
            f"{rep.max_rel:.3e} > {tol:.1e}")
    return rep


# ---------------------------------------------------------------------------
# commuting pairs
# ---------------------------------------------------------------------------

class CommutingPair:
    """A = -(hbar^2/2) d^2 + V0 together with an odd-order B with [A,B] = 0,
    certified on coefficient jets at the base points at construction."""

    def __init__(self, A, B, potential, hbar, params=None, base_points=None,
                 tol=1e-8, jet_order=None):
        self.A = A
        self.B = B
        self.potential = potential
        self.hbar = complex(hbar)
        self.params = dict(params or {})
        self.base_points = _default_points(potential, base_points)
        if jet_order is None:
            jet_order = self.A.max_order + self.B.max_order + 4
        self.jet_order = jet_order
        self.report = self._certify(tol)

    def _certify(self, tol):
        rep = ResidualReport()
        scale = 1.0
        for y in self.base_points:
            Aj = self.A.jet((y,), self.jet_order)
            Bj = self.B.jet((y,), self.jet_order)
            C = Aj.commutator(Bj)
            scale = max(scale, Aj.norm() * Bj.norm())
            rep.add((y,), "commutator", C.norm())
        rep.scale = scale
        if rep.max_rel > tol:
            raise ConditionViolated(
                f"[A,B] relative residual {rep.max_rel:.3e} > {tol:.1e}")
        return rep

    @property
    def order(self):
        return self.B.max_order

    def rescaled(self, factor, tol=1e-8):
        """Same pair with B multiplied by a constant."""
        return CommutingPair(self.A, self.B * factor, self.potential,
                             self.hbar, params=self.params,
                             base_points=self.base_points, tol=tol,
                             jet_order=self.jet_order)

    def __repr__(self):
        return (f"CommutingPair(order={self.order}, "
                f"points={len(self.base_points)}, "
                f"max_rel={self.report.max_rel:.2e})")


def hamiltonian_1d(V0, hbar):
    V0 = _as_field(V0)
    return DiffOp({(2,): -(complex(hbar) ** 2) / 2.0, (0,): V0}, nvars=1)


def build_B3(V0, b1, hbar=1.0, points=None, tol=1e-8):
    """Third-order operator commuting with -(hbar^2/2) d^2 + V0; the
    potential must satisfy the cubic-pair condition ("bc3") with constant
    b1, otherwise commutation provably fails."""
    V0 = _as_field(V0)
    points = _default_points(V0, points)
    b1 = complex(b1)
    h2 = complex(hbar) ** 2
    _check_condition("bc3", V0, {"hbar": hbar, "b1": b1}, points, tol)
    A = hamiltonian_1d(V0, hbar)
    B = DiffOp({
        (3,): 1.0,
        (1,): (b1 * h2 - 3.0 * V0) / h2,
        (0,): -1.5 * V0.derivative(2) / h2,
    }, nvars=1)
    return CommutingPair(A, B, V0, hbar, params={"b1": b1},
                         base_points=points, tol=tol)


def build_B5(V0, c0, c1, c2, c4, hbar=1.0, points=None, tol=1e-8):
    """Fifth-order operator commuting with -(hbar^2/2) d^2 + V0; the
    potential must satisfy the quintic-pair condition ("bc5") with constant
    c1.  The even-order constants c0, c2, c4 shift B by polynomials in A
    and are free."""
    V0 = _as_field(V0)
    points = _default_points(V0, points)
    c0, c1, c2, c4 = (complex(c) for c in (c0, c1, c2, c4))
    h2 = complex(hbar) ** 2
    h4 = h2 * h2
    _check_condition("bc5", V0, {"hbar": hbar, "c1": c1}, points, tol)
    Vp = V0.derivative(2)
    Vpp = Vp.derivative(2)
    Vppp = Vpp.derivative(2)
    A = hamiltonian_1d(V0, hbar)
    B = DiffOp({
        (5,): 1.0,
        (4,): c4,
        (3,): -5.0 * V0 / h2,
        (2,): -(-2.0 * c2 * h2 + 8.0 * c4 * V0 + 15.0 * Vp) / (2.0 * h2),
        (1,): -(-4.0 * c1 * h4 + 16.0 * c4 * Vp * h2 + 25.0 * Vpp * h2
                - 30.0 * V0 * V0) / (4.0 * h4),
        (0,): -(-8.0 * c0 * h4 + 16.0 * c4 * Vpp * h2 + 16.0 * c2 * h2 * V0
                + 15.0 * Vppp * h2 - 32.0 * V0 * V0 * c4
                - 60.0 * V0 * Vp) / (8.0 * h4),
    }, nvars=1)
    return CommutingPair(A, B, V0, hbar,
                         params={"c0": c0, "c1": c1, "c2": c2, "c4": c4},
                         base_points=points, tol=tol)


# ---------------------------------------------------------------------------
# spectral curves
# ---------------------------------------------------------------------------

class SpectralCurve:
    """Polynomial relation sum c_{ij} lambda^i mu^j = 0 between the
    eigenvalues of a commuting pair.  Coefficients set to None are unknown
    and get fitted (provenance "fitted") by spectral_relation_check."""

    def __init__(self, monomials, provenance=None):
        self.monomials = {}
        self.provenance = {}
        for key, c in monomials.items():
            key = (int(key[0]), int(key[1]))
            self.monomials[key] = None if c is None else complex(c)
            self.provenance[key] = (provenance or {}).get(
                key, "unknown" if c is None else "given")

    @property
    def unknown_keys(self):
        return sorted(k for k, c in self.monomials.items() if c is None)

    def mu_degree(self):
        return max(j for (_, j) in self.monomials)

    def evaluate(self, lam, mu):
        total = 0.0
        for (i, j), c in self.monomials.items():
            if c is None:
                raise ValueError("curve has unfitted coefficients")
            total += c * lam ** i * mu ** j
        return total

    def with_coeffs(self, values):
        mon = dict(self.monomials)
        prov = dict(self.provenance)
        for k, v in values.items():
            mon[k] = complex(v)
            prov[k] = "fitted"
        return SpectralCurve(mon, provenance=prov)

    def flipped_B(self):
        """The curve for the pair (A, -B): odd powers of mu change sign."""
        return SpectralCurve(
            {k: (None if c is None else c * (-1) ** k[1])
             for k, c in self.monomials.items()},
            provenance=dict(self.provenance))

    def to_json(self):
        return json.dumps([
            {"powers": list(k),
             "coeff": None if c is None else [c.real, c.imag],
             "provenance": self.provenance[k]}
            for k, c in sorted(self.monomials.items())])

    @classmethod
    def from_json(cls, blob):
        if isinstance(blob, str):
            blob = json.loads(blob)
        mon, prov = {}, {}
        for t in blob:
            k = tuple(t["powers"])
            mon[k] = (None if t["coeff"] is None
                      else complex(t["coeff"][0], t["coeff"][1]))
            prov[k] = t.get("provenance", "given")
        return cls(mon, provenance=prov)

    def __repr__(self):
        return f"SpectralCurve({sorted(self.monomials)})"


def mu_of_lambda(curve, lam):
    """Both roots mu of the curve at a fixed lambda (curves quadratic in
    mu; double roots are returned twice)."""
    deg = curve.mu_degree()
    if deg != 2:
        raise ValueError("curve is not quadratic in the B-eigenvalue")
    c = [0.0] * (deg + 1)
    for (i, j), coeff in curve.monomials.items():
        if coeff is None:
            raise ValueError("curve has unfitted coefficients")
        c[j] += coeff * complex(lam) ** i
    roots = np.roots([c[2], c[1], c[0]])
    if len(roots) == 1:
        roots = np.array([roots[0], roots[0]])
    return tuple(sorted(roots, key=lambda z: (z.real, z.imag)))


def _word_order(factor_orders, out):
    """Jet order needed so that sequential Leibniz composition of operators
    with the given derivative orders still carries `out` coefficient
    orders: each step costs the accumulated order of the left factor."""
    need, prefix = out, 0
    for q in factor_orders[:-1]:
        prefix += q
        need += prefix
    return need


def _monomial_jets(pair, keys, y, out_order):
    ops = {"A": pair.A, "B": pair.B}
    jets = {}
    for (i, j) in keys:
        word = " ".join(["B"] * j + ["A"] * i)
        orders = [pair.order] * j + [pair.A.max_order] * i
        start = _word_order(orders, out_order) if orders else out_order
        jets[(i, j)] = word_jet(ops, word, (y,), start).truncated(out_order)
    return jets, out_order


def _flatten(opjet, alphas, out_order):
    rows = []
    for alpha in alphas:
        if alpha in opjet.terms:
            rows.append(np.asarray(opjet.terms[alpha].coeffs,
                                   dtype=np.complex128).ravel())
        else:
            rows.append(np.zeros(out_order + 1, dtype=np.complex128))
    return np.concatenate(rows)

def _fit_block(curve, jets, alphas, out_order):
    """(features, rhs) of the linear system for the unknown coefficients
    from one base point's monomial jets."""
    unknowns = curve.unknown_keys
    cols = [_flatten(jets[k], alphas, out_order) for k in unknowns]
    known = np.zeros(
        len(alphas) * (out_order + 1), dtype=np.complex128)
    for k, c in curve.monomials.items():
        if c is not None:
            known += c * _flatten(jets[k], alphas, out_order)
    return (np.column_stack(cols) if cols else None), -known


def spectral_relation_check(pair, curve, points=None, order=None,
                            rcond=1e-10):
    """Certify the operator identity P(A, B) = 0 on coefficient jets.

    Unknown curve coefficients (None) are fitted first by least squares
    over all base points; the fitted values land in the returned report's
    `fit` dict and in `curve_fitted`.  `fit_spread` holds the maximum
    disagreement between per-point fits (constancy check)."""
    points = pair.base_points if points is None else list(points)
    if order is None:
        order = 3
    per_point = []
    alphas = None
    for y in points:
        jets, out_order = _monomial_jets(pair, curve.monomials.keys(), y,
                                         order)
        if alphas is None:
            alphas = sorted({a for m in jets.values() for a in m.terms})
        per_point.append((y, jets, out_order))

    unknowns = curve.unknown_keys
    fit, fit_spread = {}, {}
    if unknowns:
        blocks = [_fit_block(curve, jets, alphas, oo)
                  for (_, jets, oo) in per_point]
        M = np.vstack([b[0] for b in blocks])
        r = np.concatenate([b[1] for b in blocks])
        sol, _, rank, _ = np.linalg.lstsq(M, r, rcond=rcond)
        if rank < len(unknowns):
            raise RankDeficientFit(
                f"curve fit rank {rank} < {len(unknowns)} unknowns")
        fit = dict(zip(unknowns, (complex(s) for s in sol)))
        # constancy across base points
        locals_ = []
        for b in blocks:
            ls, _, lrank, _ = np.linalg.lstsq(b[0], b[1], rcond=rcond)
            if lrank == len(unknowns):
                locals_.append(ls)
        if len(locals_) > 1:
            arr = np.array(locals_)
            for idx, k in enumerate(unknowns):
                col = arr[:, idx]
                fit_spread[k] = float(
                    max(abs(a - b) for a in col for b in col))
        curve = curve.with_coeffs(fit)

    rep = ResidualReport()
    scale = 1.0
    for (y, jets, oo) in per_point:
        total = None
        for k, c in curve.monomials.items():
            term = jets[k] * c
            total = term if total is None else total + term
            scale = max(scale, abs(c) * jets[k].norm())
        rep.add((y,), "curve", total.norm())
    rep.scale = scale
    rep.fit = fit
    rep.fit_spread = fit_spread
    rep.curve_fitted = curve
    return rep


def cubic_pair_curve(pair, points=None, order=None, extended=False):
    """Fit the free constant alpha of the cubic-pair relation
    (hbar^6/8) B^2 + A^3 + alpha A^2 = 0 and certify it.  The alpha-only
    form requires the additive constant of the potential to be tuned;
    `extended=True` also fits linear and constant terms, which absorbs a
    generic constant shift.  Returns (fitted curve, report)."""
    h6 = pair.hbar ** 6
    mon = {(3, 0): 1.0, (2, 0): None, (0, 2): h6 / 8.0}
    if extended:
        mon[(1, 0)] = None
        mon[(0, 0)] = None
    curve = SpectralCurve(mon)
    rep = spectral_relation_check(pair, curve, points=points, order=order)
    return rep.curve_fitted, rep


def quintic_pair_curve(pair, points=None, order=None):
    """The quintic-pair relation B^2 + a1 A^5 + a2 B A^2 + a3 A^4
    + a4 B A + a5 A^3 + a6 B + a7 A^2 + a8 A + a10 = 0 with a1..a6
    determined by (c1, c2, c4, c0) and a7, a8, a10 fitted."""
    h = pair.hbar
    c0 = pair.params["c0"]
    c1 = pair.params["c1"]
    c2 = pair.params["c2"]
    c4 = pair.params["c4"]
    curve = SpectralCurve({
        (0, 2): 1.0,
        (5, 0): 32.0 / h ** 10,
        (2, 1): -8.0 * c4 / h ** 4,
        (4, 0): 16.0 * c4 ** 2 / h ** 8,
        (1, 1): 4.0 * c2 / h ** 2,
        (3, 0): 16.0 * (c1 - c2 * c4) / h ** 6,
        (0, 1): -2.0 * c0,
        (2, 0): None,
        (1, 0): None,
        (0, 0): None,
    })
    rep = spectral_relation_check(pair, curve, points=points, order=order)
    return rep.curve_fitted, rep


# ---------------------------------------------------------------------------
# eigenfunction reduction to a quadrature
# ---------------------------------------------------------------------------

def _min_origin_distance(vals):
    """Distance from 0 to the sampled trace of a complex-valued function,
    interpolating linearly between consecutive samples so zero crossings
    between grid points are caught."""
    best = float(np.min(np.abs(vals)))
    for a, b in zip(vals[:-1], vals[1:]):
        d = b - a
        n2 = abs(d) ** 2
        if n2 == 0.0:
            continue
        t = -np.real(np.conj(d) * a) / n2
        if 0.0 < t < 1.0:
            best = min(best, abs(a + t * d))
    return best


class EigenReduction:
    """First-order reduction g'/g = w(y) of the joint eigenproblem
    A g = lambda g, B g = mu g, together with the quadrature solution g
    (normalized g(interval[0]) = 1) and its certification report."""

    def __init__(self, pair, lam, mu, w, g, steps, interval, report):
        self.pair = pair
        self.lam = lam
        self.mu = mu
        self.w = w
        self.g = g
        self.steps = steps
        self.interval = interval
        self.report = report


def eigen_reduce(pair, curve, lam, branch=0, interval=None, n_check=7,
                 resonant_tol=1e-4, tol=None):
    """Eliminate derivatives 2..order between (A - lambda) g = 0 and
    (B - mu) g = 0, producing g'/g as a ratio of coefficient fields, then
    solve for g by quadrature and certify both eigenvalue equations."""
    lam = complex(lam)
    mu = mu_of_lambda(curve, lam)[branch]
    if interval is None:
        lo, hi = min(pair.base_points), max(pair.base_points)
        interval = (lo, hi) if hi > lo else (lo - 0.1, lo + 0.1)
    n = pair.order
    h2 = pair.hbar ** 2
    a = (2.0 / h2) * (_as_field(pair.potential) - lam)

    # g^(k) = P_k g + Q_k g' by repeated substitution of g'' = a g
    P = [_as_field(1.0), _as_field(0.0)]
    Q = [_as_field(0.0), _as_field(1.0)]
    for _ in range(n - 1):
        Pk, Qk = P[-1], Q[-1]
        P.append(Pk.derivative(2) + Qk * a)
        Q.append(Pk + Qk.derivative(2))
    num = _as_field(-mu)
    den = _as_field(0.0)
    for (k,), b in pair.B.terms.items():
        num = num + b * P[k]
        den = den + b * Q[k]

    ys = np.linspace(interval[0], interval[1], 81)
    dvals = np.array([den.value((y,)) for y in ys])
    dmax = np.max(np.abs(dvals))
    if dmax == 0.0 or _min_origin_distance(dvals) < resonant_tol * dmax:
        raise ResonantLambda(
            f"reduced first-order coefficient vanishes on {interval} "
            f"at lambda={lam}")
    w = (0.0 - num) / den

    S = quadrature_field(Fn1Field(w), interval[0], y0=0.0, name="log_g")
    g = ScalarField(exp(Func1(S, u2, name="log_g")))

    rep = ResidualReport()
    pad = 0.05 * (interval[1] - interval[0])
    checks = np.linspace(interval[0] + pad, interval[1] - pad, n_check)
    scale = 1.0
    for y in checks:
        o = pair.order + 4
        gj = g.jet((y,), o - pair.order)
        Aj = op_apply(pair.A, g, (y,), o - pair.order + 2)
        Bj = op_apply(pair.B, g, (y,), o)
        rep.add((y,), "A-eigen", (Aj - lam * gj.truncated(Aj.order)).norm())
        rep.add((y,), "B-eigen", (Bj - mu * gj.truncated(Bj.order)).norm())
        Ajn = pair.A.jet((y,), 4).norm()
        Bjn = pair.B.jet((y,), 4).norm()
        scale = max(scale, gj.norm() * max(Ajn + abs(lam), Bjn + abs(mu)))
    rep.scale = scale
    if tol is not None and rep.max_rel > tol:
        raise ConditionViolated(
            f"eigen reduction residual {rep.max_rel:.3e} > {tol:.1e}")
    return EigenReduction(pair, lam, mu, w, g, steps=n - 1,
                          interval=interval, report=rep)
