"""Finite-order partial differential operators with field coefficients.

A DiffOp is a finite sum  sum_alpha  a_alpha(u) d^alpha  over derivative
multi-indices alpha.  All identities (commutation, algebra relations,
spectral curves) are certified numerically: the operator's coefficients are
turned into jets at a base point (an OpJet), composed by the Leibniz rule,
and the resulting coefficient jets compared against zero.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .errors import OrderExhausted
from .fields import ScalarField, as_expr
from .jets import Jet

_SCALARS = (int, float, complex, np.integer, np.floating, np.complexfloating)


def _as_field(c):
    if isinstance(c, ScalarField):
        return c
    return ScalarField(as_expr(c))


class DiffOp:
    """Immutable differential operator sum_alpha coeff_alpha d^alpha with
    ScalarField coefficients; alpha is a tuple of length nvars."""

    def __init__(self, terms, nvars=2):
        self.nvars = nvars
        clean = {}
        for alpha, c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != nvars:
                raise ValueError("multi-index length != nvars")
            c = _as_field(c)
            if c.is_zero():
                continue
            if alpha in clean:
                c = clean[alpha] + c
            clean[alpha] = c
        self.terms = clean

    @property
    def max_order(self):
        return max((sum(a) for a in self.terms), default=0)

    # construction sugar -------------------------------------------------

    @classmethod
    def identity(cls, nvars=2):
        return cls({(0,) * nvars: 1.0}, nvars=nvars)

    @classmethod
    def partial(cls, axis, nvars=2, power=1):
        alpha = [0] * nvars
        alpha[axis - 1] = power
        return cls({tuple(alpha): 1.0}, nvars=nvars)

    def __add__(self, other):
        if isinstance(other, _SCALARS + (ScalarField,)):
            other = DiffOp({(0,) * self.nvars: other}, nvars=self.nvars)
        merged = dict(self.terms)
        for a, c in other.terms.items():
            merged[a] = merged[a] + c if a in merged else c
        return DiffOp(merged, nvars=self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return DiffOp({a: -c for a, c in self.terms.items()},
                      nvars=self.nvars)

    def __sub__(self, other):
        if isinstance(other, _SCALARS + (ScalarField,)):
            other = DiffOp({(0,) * self.nvars: other}, nvars=self.nvars)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        """Left multiplication by a scalar or a field (no derivatives)."""
        return DiffOp({a: c * scalar for a, c in self.terms.items()},
                      nvars=self.nvars)

    __rmul__ = __mul__

    def jet(self, point, order):
        """Coefficient jets at a base point."""
        return OpJet(self.nvars, tuple(point), order,
                     {a: c.jet(point, order) for a, c in self.terms.items()})

    def to_json(self):
        return [{"index": list(a), "coeff": c.to_json()}
                for a, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, blob, nvars=2, func1_registry=None):
        return cls({tuple(t["index"]):
                    ScalarField.from_json(t["coeff"],
                                          func1_registry=func1_registry)
                    for t in blob}, nvars=nvars)

    def __repr__(self):
        keys = ", ".join(str(a) for a in sorted(self.terms))
        return f"DiffOp(nvars={self.nvars}, indices=[{keys}])"


class OpJet:
    """Operator with jet coefficients at a fixed base point; the working
    representation for composition and commutators.  All coefficient jets
    share one order."""

    def __init__(self, nvars, base, order, terms):
        self.nvars = nvars
        self.base = tuple(base)
        self.order = order
        self.terms = {a: j for a, j in terms.items()}

    @property
    def max_order(self):
        return max((sum(a) for a in self.terms), default=0)

    def truncated(self, order):
        if order == self.order:
            return self
        return OpJet(self.nvars, self.base, order,
                     {a: j.truncated(order) for a, j in self.terms.items()})

    def _common(self, other):
        k = min(self.order, other.order)
        return self.truncated(k), other.truncated(k)

    def __add__(self, other):
        a, b = self._common(other)
        merged = dict(a.terms)
        for idx, j in b.terms.items():
            merged[idx] = merged[idx] + j if idx in merged else j
        return OpJet(self.nvars, self.base, a.order, merged)

    def __neg__(self):
        return OpJet(self.nvars, self.base, self.order,
                     {a: -j for a, j in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return OpJet(self.nvars, self.base, self.order,
                     {a: j * scalar for a, j in self.terms.items()})

    __rmul__ = __mul__

    def scale_norm(self):
        return max((j.norm() for j in self.terms.values()), default=0.0)

    def norm(self):
        """Max absolute value over all coefficient jet entries."""
        return self.scale_norm()

    def compose(self, other):
        """Leibniz composition: the order of the result's coefficient jets
        drops by this operator's derivative order."""
        p = self.max_order
        out_order = min(self.order, other.order) - p
        if out_order < 0:
            raise OrderExhausted("jet order too low for composition")
        a_jets = self.truncated(out_order)
        out = {}
        for alpha in self.terms:
            at = a_jets.terms[alpha]
            for beta, bj in other.terms.items():
                # d^alpha (b d^beta) = sum_{gamma<=alpha} C(alpha,gamma)
                #                      (d^gamma b) d^{alpha-gamma+beta}
                for gamma in _sub_indices(alpha):
                    db = bj
                    for ax, g in enumerate(gamma):
                        for _ in range(g):
                            db = db.derivative(ax + 1)
                    if db.order < out_order:
                        raise OrderExhausted(
                            "jet order too low for composition")
                    db = db.truncated(out_order)
                    coeff = 1
                    for ai, gi in zip(alpha, gamma):
                        coeff *= comb(ai, gi)
                    idx = tuple(ai - gi + bi for ai, gi, bi
                                in zip(alpha, gamma, beta))
                    term = at * db * coeff
                    out[idx] = out[idx] + term if idx in out else term
        return OpJet(self.nvars, self.base, out_order, out)

    def commutator(self, other):
        k = max(self.max_order, other.max_order)
        out_order = min(self.order, other.order) - k
        ab = self.compose(other).truncated(out_order)
        ba = other.compose(self).truncated(out_order)
        return ab - ba

    def apply(self, fjet):
        """Jet of (P f) at the base point."""
        p = self.max_order
        out_order = min(self.order, fjet.order) - p
        if out_order < 0:
            raise OrderExhausted("jet order too low for application")
        out = Jet.constant(0.0, self.nvars, self.base, out_order)
        for alpha, aj in self.terms.items():
            df = fjet
            for ax, a in enumerate(alpha):
                for _ in range(a):
                    df = df.derivative(ax + 1)
            out = out + aj.truncated(out_order) * df.truncated(out_order)
        return out


def _sub_indices(alpha):
    if len(alpha) == 1:
        return [(g,) for g in range(alpha[0] + 1)]
    return [(g1, g2) for g1 in range(alpha[0] + 1)
            for g2 in range(alpha[1] + 1)]


# spec-facing wrappers ---------------------------------------------------

def op_compose(P, Q, at, order):
    return P.jet(at, order).compose(Q.jet(at, order))


def op_commutator(P, Q, at, order):
    return P.jet(at, order).commutator(Q.jet(at, order))


def op_apply(P, f, at, order):
    if isinstance(f, ScalarField):
        f = f.jet(at, order)
    return P.jet(at, order).apply(f)


class OpPoly:
    """Operator polynomial sum_{j,k} coeff_{jk} H^j L^k with DiffOp
    coefficients multiplying the powers on the right."""

    def __init__(self, terms):
        self.terms = {(int(j), int(k)): op for (j, k), op in terms.items()}

    def expand(self, H, L, at, order):
        """Fully expanded OpJet at a base point: powers of H and L are
        built by repeated composition (memoized), composed with each
        coefficient, and summed at a common jet order."""
        Hj = H.jet(at, order)
        Lj = L.jet(at, order)
        pieces = []
        cache = {}

        def power_jet(j, k):
            if (j, k) in cache:
                return cache[(j, k)]
            if j == 0 and k == 0:
                out = OpJet(Hj.nvars, Hj.base, order,
                            {(0,) * Hj.nvars:
                             Jet.constant(1.0, Hj.nvars, Hj.base, order)})
            elif j > 0:
                out = power_jet(j - 1, k).compose(Hj)
            else:
                out = power_jet(j, k - 1).compose(Lj)
            cache[(j, k)] = out
            return out

        for (j, k), op in self.terms.items():
            cj = op.jet(at, order)
            pieces.append(cj.compose(power_jet(j, k)))
        out_order = min(p.order for p in pieces)
        total = pieces[0].truncated(out_order)
        for p in pieces[1:]:
            total = total + p.truncated(out_order)
        return total


def oppoly_expand(T, H, L, at, order):
    return T.expand(H, L, at, order)


def word_jet(ops, word, at, order):
    """Expand a product word like "A A B" over named operators; returns an
    OpJet.  A word of length 0 is the identity."""
    names = word.split()
    if not names:
        first = next(iter(ops.values()))
        nv = first.nvars
        return OpJet(nv, tuple(at), order,
                     {(0,) * nv: Jet.constant(1.0, nv, tuple(at), order)})
    out = ops[names[0]].jet(at, order)
    for name in names[1:]:
        out = out.compose(ops[name].jet(at, order))
    return out
