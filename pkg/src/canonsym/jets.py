"""Truncated Taylor ("jet") arithmetic in one and two complex variables.

A jet stores plain Taylor coefficients c_alpha = (d^alpha f)/alpha! at a base
point, so the represented function is sum c_alpha (u - base)^alpha.  All
operator identities in the rest of the package reduce to arithmetic on these
coefficient arrays.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve

from .errors import (
    BranchPointAtBase,
    DivisionByVanishingJet,
    IncompatibleJets,
    OrderExhausted,
)

DEFAULT_ORDER = 12
DIV_FLOOR = 1e-12

_SCALARS = (int, float, complex, np.integer, np.floating, np.complexfloating)


def _triangle_mask(order):
    i = np.arange(order + 1)
    return (i[:, None] + i[None, :]) <= order


class Jet:
    """Immutable truncated Taylor expansion at a base point.

    coeffs: 1-var -> shape (order+1,); 2-var -> shape (order+1, order+1)
    with entries at i+j > order kept identically zero.
    """

    __slots__ = ("nvars", "order", "base", "coeffs")

    def __init__(self, nvars, order, base, coeffs):
        if nvars not in (1, 2):
            raise ValueError("nvars must be 1 or 2")
        if order < 0:
            raise ValueError("order must be non-negative")
        self.nvars = nvars
        self.order = order
        self.base = tuple(complex(b) for b in base)
        arr = np.array(coeffs, dtype=np.complex128)
        expect = (order + 1,) if nvars == 1 else (order + 1, order + 1)
        if arr.shape != expect:
            raise ValueError(f"coefficient shape {arr.shape} != {expect}")
        if nvars == 2:
            arr = np.where(_triangle_mask(order), arr, 0.0)
        arr.setflags(write=False)
        self.coeffs = arr

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, value, nvars=2, base=(0.0, 0.0), order=DEFAULT_ORDER):
        base = tuple(base)[:nvars]
        shape = (order + 1,) if nvars == 1 else (order + 1, order + 1)
        c = np.zeros(shape, dtype=np.complex128)
        c[(0,) * nvars] = value
        return cls(nvars, order, base, c)

    @classmethod
    def variable(cls, axis, base, order=DEFAULT_ORDER, nvars=None):
        """Jet of the coordinate u_axis (axis is 1 or 2)."""
        base = tuple(base)
        if nvars is None:
            nvars = len(base)
        if not 1 <= axis <= nvars:
            raise ValueError("axis out of range")
        shape = (order + 1,) if nvars == 1 else (order + 1, order + 1)
        c = np.zeros(shape, dtype=np.complex128)
        c[(0,) * nvars] = base[axis - 1]
        if order >= 1:
            idx = [0] * nvars
            idx[axis - 1] = 1
            c[tuple(idx)] = 1.0
        return cls(nvars, order, base, c)

    # -- helpers --------------------------------------------------------

    @property
    def value(self):
        return complex(self.coeffs[(0,) * self.nvars])

    def coefficient(self, *alpha):
        if len(alpha) != self.nvars or sum(alpha) > self.order:
            raise IndexError("multi-index outside stored triangle")
        return complex(self.coeffs[alpha])

    def norm(self):
        return float(np.max(np.abs(self.coeffs)))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.coeffs.view(np.float64))))

    def _like(self, coeffs, order=None):
        return Jet(self.nvars, self.order if order is None else order,
                   self.base, coeffs)

    def _check(self, other):
        if (self.nvars != other.nvars or self.base != other.base
                or self.order != other.order):
            raise IncompatibleJets(
                f"(nvars={self.nvars}, base={self.base}, order={self.order}) vs "
                f"(nvars={other.nvars}, base={other.base}, order={other.order})")

    def truncated(self, order):
        if order > self.order:
            raise OrderExhausted("cannot extend a jet by truncation")
        sl = (slice(0, order + 1),) * self.nvars
        arr = np.array(self.coeffs[sl])
        return Jet(self.nvars, order, self.base, arr)

    def padded(self, order):
        """Extend with zero coefficients (only valid when the tail is known
        to be irrelevant to the caller)."""
        if order < self.order:
            return self.truncated(order)
        shape = (order + 1,) if self.nvars == 1 else (order + 1, order + 1)
        c = np.zeros(shape, dtype=np.complex128)
        sl = (slice(0, self.order + 1),) * self.nvars
        c[sl] = self.coeffs
        return Jet(self.nvars, order, self.base, c)

    # -- ring operations ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, _SCALARS):
            c = np.array(self.coeffs)
            c[(0,) * self.nvars] += other
            return self._like(c)
        self._check(other)
        return self._like(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return self._like(self.coeffs * other)
        self._check(other)
        full = convolve(self.coeffs, other.coeffs, method="direct")
        sl = (slice(0, self.order + 1),) * self.nvars
        return self._like(full[sl])

    __rmul__ = __mul__

    def reciprocal(self):
        b0 = self.value
        if abs(b0) < DIV_FLOOR * max(self.norm(), 1.0):
            raise DivisionByVanishingJet(f"constant term {b0} below floor")
        # Newton iteration r <- r(2 - b r); doubles the correct degree each
        # step, so ceil(log2(order+1)) + 1 steps suffice.
        r = Jet.constant(1.0 / b0, self.nvars, self.base, self.order)
        steps = max(1, math.ceil(math.log2(self.order + 1)) + 1)
        for _ in range(steps):
            r = r * (2.0 - self * r)
        return r

    def __truediv__(self, other):
        if isinstance(other, _SCALARS):
            return self * (1.0 / complex(other))
        self._check(other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * complex(other)

    def __pow__(self, p):
        return jet_pow(self, p)

    # -- calculus -------------------------------------------------------

    def derivative(self, axis=1):
        if self.order < 1:
            raise OrderExhausted("derivative of an order-0 jet")
        k = self.order
        if self.nvars == 1:
            c = self.coeffs[1:] * np.arange(1, k + 1)
            return Jet(1, k - 1, self.base, c)
        if axis == 1:
            c = self.coeffs[1:, :k] * np.arange(1, k + 1)[:, None]
        elif axis == 2:
            c = self.coeffs[:k, 1:] * np.arange(1, k + 1)[None, :]
        else:
            raise ValueError("axis must be 1 or 2")
        return Jet(2, k - 1, self.base, c)

    def shifted_zero(self):
        """This jet minus its constant term."""
        c = np.array(self.coeffs)
        c[(0,) * self.nvars] = 0.0
        return self._like(c)

    def __repr__(self):
        return (f"Jet(nvars={self.nvars}, order={self.order}, "
                f"base={self.base}, value={self.value:.6g})")


# -- spec-facing operation wrappers -------------------------------------

def jet_arith(op_kind, a, b):
    if op_kind == "add":
        return a + b
    if op_kind == "sub":
        return a - b
    if op_kind == "mul":
        return a * b
    if op_kind == "scale":
        return a * complex(b)
    if op_kind == "div":
        return a / b
    raise ValueError(f"unknown op_kind {op_kind!r}")


def jet_derivative(a, axis=1):
    return a.derivative(axis)


def _compose_series(d, a):
    """sum_n d[n] * (a - a0)^n, truncated to a.order."""
    h = a.shifted_zero()
    out = Jet.constant(d[0], a.nvars, a.base, a.order)
    term = Jet.constant(1.0, a.nvars, a.base, a.order)
    for n in range(1, len(d)):
        term = term * h
        if d[n] != 0.0:
            out = out + term * d[n]
        if term.norm() == 0.0:
            break
    return out


def _series_exp(a0, k):
    e = np.exp(a0)
    return [e / math.factorial(n) for n in range(k + 1)]


def _series_trig(a0, k, kind):
    # derivatives cycle with period 4 (sin/cos) or 2 with sign (sinh/cosh)
    out = []
    for n in range(k + 1):
        if kind == "sin":
            v = np.sin(a0 + n * np.pi / 2)
        elif kind == "cos":
            v = np.cos(a0 + n * np.pi / 2)
        elif kind == "sinh":
            v = np.sinh(a0) if n % 2 == 0 else np.cosh(a0)
        else:  # cosh
            v = np.cosh(a0) if n % 2 == 0 else np.sinh(a0)
        out.append(v / math.factorial(n))
    return out


def _series_log(a0, k):
    if a0 == 0:
        raise BranchPointAtBase("log at 0")
    out = [np.log(a0)]
    for n in range(1, k + 1):
        out.append((-1) ** (n + 1) / (n * a0 ** n))
    return out


def _series_pow(a0, p, k):
    if a0 == 0:
        raise BranchPointAtBase("non-integer power at 0")
    out = []
    c = complex(a0) ** p  # principal branch
    coef = 1.0 + 0j
    for n in range(k + 1):
        out.append(coef * c / (complex(a0) ** n))
        coef *= (p - n) / (n + 1)
    return out


def jet_elem(fn, a):
    """Elementary function of a jet: exp, sin, cos, sinh, cosh, tanh, sqrt,
    log; pow is provided by jet_pow."""
    k = a.order
    a0 = a.value
    if fn == "exp":
        return _compose_series(_series_exp(a0, k), a)
    if fn in ("sin", "cos", "sinh", "cosh"):
        return _compose_series(_series_trig(a0, k, fn), a)
    if fn == "tanh":
        e = jet_elem("exp", a * 2.0)
        return (e - 1.0) / (e + 1.0)
    if fn == "tan":
        return jet_elem("sin", a) / jet_elem("cos", a)
    if fn == "log":
        return _compose_series(_series_log(a0, k), a)
    if fn == "sqrt":
        return jet_pow(a, 0.5)
    raise ValueError(f"unknown elementary function {fn!r}")


def jet_pow(a, p):
    """a**p; integer p by repeated multiplication, otherwise the principal
    branch (error at a branch point)."""
    if isinstance(p, Jet):
        raise TypeError("jet exponents are not supported")
    pc = complex(p)
    if pc.imag == 0.0 and float(pc.real).is_integer():
        n = int(pc.real)
        if n == 0:
            return Jet.constant(1.0, a.nvars, a.base, a.order)
        base = a if n > 0 else a.reciprocal()
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out
    return _compose_series(_series_pow(a.value, pc, a.order), a)


def seeds(base, order=DEFAULT_ORDER):
    """Coordinate jets (u1[, u2]) at a base point."""
    base = tuple(base)
    return tuple(Jet.variable(i + 1, base, order) for i in range(len(base)))
