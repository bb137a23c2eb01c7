"""Analytic coefficient fields that emit jets at arbitrary admissible points.

Two families:

* closed-form fields, held as small expression trees over the coordinates
  with complex constants and elementary functions;
* ODE-backed one-variable functions (Weierstrass-type potentials, the
  angular Painleve VI profile, quadrature antiderivatives), which integrate
  from an anchor and then extend their derivative stack to any jet order
  with the ODE's Taylor recurrence.

Expression trees also provide exact symbolic differentiation, which keeps
the determining-equation evaluations free of finite differencing.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import ivp
from .errors import InconsistentAnchor, OutOfDomain
from .jets import Jet, jet_elem, jet_pow

_SCALARS = (int, float, complex, np.integer, np.floating, np.complexfloating)

_FNS = ("exp", "sin", "cos", "sinh", "cosh", "tanh", "tan", "log", "sqrt")


def _scalar_call(fn, z):
    z = complex(z)
    if fn == "sqrt":
        return complex(np.sqrt(z + 0j))
    return complex(getattr(np, fn)(z))


# ---------------------------------------------------------------------------
# expression trees
# ---------------------------------------------------------------------------

class Expr:
    """Node of a closed-form expression over named coordinates."""

    def ev(self, env):
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError

    # arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return _add(self, as_expr(other))

    def __radd__(self, other):
        return _add(as_expr(other), self)

    def __sub__(self, other):
        return _add(self, _mul(Const(-1), as_expr(other)))

    def __rsub__(self, other):
        return _add(as_expr(other), _mul(Const(-1), self))

    def __neg__(self):
        return _mul(Const(-1), self)

    def __mul__(self, other):
        return _mul(self, as_expr(other))

    def __rmul__(self, other):
        return _mul(as_expr(other), self)

    def __truediv__(self, other):
        return _mul(self, Pow(as_expr(other), -1))

    def __rtruediv__(self, other):
        return _mul(as_expr(other), Pow(self, -1))

    def __pow__(self, p):
        return Pow(self, p)

    def __repr__(self):
        return f"Expr({self.to_json()})"


def as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, ScalarField):
        return x.expr
    if isinstance(x, _SCALARS):
        return Const(complex(x))
    raise TypeError(f"cannot coerce {type(x)} to Expr")


class Const(Expr):
    def __init__(self, value):
        self.value = complex(value)

    def ev(self, env):
        return self.value

    def diff(self, var):
        return Const(0)

    def to_json(self):
        return {"op": "const", "value": [self.value.real, self.value.imag]}


class Var(Expr):
    def __init__(self, name):
        self.name = name

    def ev(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise OutOfDomain(f"no value bound for coordinate {self.name}")

    def diff(self, var):
        return Const(1 if var == self.name else 0)

    def to_json(self):
        return {"op": self.name}


class Add(Expr):
    def __init__(self, terms):
        self.terms = terms

    def ev(self, env):
        out = self.terms[0].ev(env)
        for t in self.terms[1:]:
            out = out + t.ev(env)
        return out

    def diff(self, var):
        return _addn([t.diff(var) for t in self.terms])

    def to_json(self):
        return {"op": "add", "args": [t.to_json() for t in self.terms]}


class Mul(Expr):
    def __init__(self, factors):
        self.factors = factors

    def ev(self, env):
        out = self.factors[0].ev(env)
        for f in self.factors[1:]:
            out = out * f.ev(env)
        return out

    def diff(self, var):
        terms = []
        for i, f in enumerate(self.factors):
            df = f.diff(var)
            if isinstance(df, Const) and df.value == 0:
                continue
            terms.append(_muln([*self.factors[:i], df, *self.factors[i + 1:]]))
        return _addn(terms)

    def to_json(self):
        return {"op": "mul", "args": [f.to_json() for f in self.factors]}


class Pow(Expr):
    def __init__(self, base, exponent):
        self.base = base
        self.exponent = complex(exponent)

    def ev(self, env):
        b = self.base.ev(env)
        if isinstance(b, Jet):
            return jet_pow(b, self.exponent)
        p = self.exponent
        if p.imag == 0 and float(p.real).is_integer():
            return complex(b) ** int(p.real)
        return complex(b) ** p

    def diff(self, var):
        db = self.base.diff(var)
        if isinstance(db, Const) and db.value == 0:
            return Const(0)
        return _muln([Const(self.exponent),
                      Pow(self.base, self.exponent - 1), db])

    def to_json(self):
        return {"op": "pow", "args": [self.base.to_json()],
                "exponent": [self.exponent.real, self.exponent.imag]}


_DERIV = {
    "exp": lambda a: Call("exp", a),
    "sin": lambda a: Call("cos", a),
    "cos": lambda a: _mul(Const(-1), Call("sin", a)),
    "sinh": lambda a: Call("cosh", a),
    "cosh": lambda a: Call("sinh", a),
    "tanh": lambda a: 1 - Pow(Call("tanh", a), 2),
    "tan": lambda a: 1 + Pow(Call("tan", a), 2),
    "log": lambda a: Pow(a, -1),
    "sqrt": lambda a: _mul(Const(0.5), Pow(a, -0.5)),
}


class Call(Expr):
    def __init__(self, fn, arg):
        if fn not in _FNS:
            raise ValueError(f"unknown function {fn!r}")
        self.fn = fn
        self.arg = arg

    def ev(self, env):
        a = self.arg.ev(env)
        if isinstance(a, Jet):
            return jet_elem(self.fn, a)
        return _scalar_call(self.fn, a)

    def diff(self, var):
        da = self.arg.diff(var)
        if isinstance(da, Const) and da.value == 0:
            return Const(0)
        return _mul(_DERIV[self.fn](self.arg), da)

    def to_json(self):
        return {"op": self.fn, "args": [self.arg.to_json()]}


class Func1(Expr):
    """Leaf for a one-variable function object (ODE-backed or tabulated)
    evaluated at an inner expression; jets are produced by composing the
    function's one-variable Taylor coefficients with the inner jet."""

    def __init__(self, fn1d, arg, name="f"):
        self.fn1d = fn1d
        self.arg = arg
        self.name = name

    def ev(self, env):
        a = self.arg.ev(env)
        if not isinstance(a, Jet):
            return self.fn1d.value(a)
        d = self.fn1d.jet1(a.value, a.order).coeffs
        h = a.shifted_zero()
        out = Jet.constant(d[0], a.nvars, a.base, a.order)
        term = Jet.constant(1.0, a.nvars, a.base, a.order)
        for n in range(1, len(d)):
            term = term * h
            out = out + term * d[n]
        return out

    def diff(self, var):
        da = self.arg.diff(var)
        if isinstance(da, Const) and da.value == 0:
            return Const(0)
        return _mul(Func1(self.fn1d.derivative(), self.arg,
                          name=self.name + "'"), da)

    def to_json(self):
        return {"op": "func1", "name": self.name,
                "args": [self.arg.to_json()]}


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


def _addn(terms):
    flat = []
    const = 0j
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        elif _is_const(t):
            const += t.value
        else:
            flat.append(t)
    if const != 0 or not flat:
        flat.append(Const(const))
    return flat[0] if len(flat) == 1 else Add(flat)


def _add(a, b):
    return _addn([a, b])


def _muln(factors):
    flat = []
    const = 1 + 0j
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        elif _is_const(f):
            const *= f.value
        else:
            flat.append(f)
    if const == 0:
        return Const(0)
    if const != 1 or not flat:
        flat.insert(0, Const(const))
    return flat[0] if len(flat) == 1 else Mul(flat)


def _mul(a, b):
    return _muln([a, b])


u1 = Var("u1")
u2 = Var("u2")


def exp(x):
    return Call("exp", as_expr(x))


def sin(x):
    return Call("sin", as_expr(x))


def cos(x):
    return Call("cos", as_expr(x))


def sinh(x):
    return Call("sinh", as_expr(x))


def cosh(x):
    return Call("cosh", as_expr(x))


def tanh(x):
    return Call("tanh", as_expr(x))


def tan(x):
    return Call("tan", as_expr(x))


def log(x):
    return Call("log", as_expr(x))


def sqrt(x):
    return Call("sqrt", as_expr(x))


def expr_from_json(obj, func1_registry=None):
    op = obj["op"]
    if op == "const":
        re, im = obj["value"]
        return Const(complex(re, im))
    if op in ("u1", "u2", "t") or (not obj.get("args") and op not in _FNS):
        return Var(op)
    if op == "add":
        return _addn([expr_from_json(a, func1_registry) for a in obj["args"]])
    if op == "mul":
        return _muln([expr_from_json(a, func1_registry) for a in obj["args"]])
    if op == "pow":
        re, im = obj["exponent"]
        return Pow(expr_from_json(obj["args"][0], func1_registry),
                   complex(re, im))
    if op == "func1":
        if not func1_registry or obj["name"] not in func1_registry:
            raise ValueError(f"no registered function for {obj['name']!r}")
        return Func1(func1_registry[obj["name"]],
                     expr_from_json(obj["args"][0], func1_registry),
                     name=obj["name"])
    if op in _FNS:
        return Call(op, expr_from_json(obj["args"][0], func1_registry))
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# one-variable function objects
# ---------------------------------------------------------------------------

class ClosedForm1D:
    """One-variable function defined by an Expr in a single coordinate."""

    def __init__(self, expr, var="u2"):
        self.expr = expr
        self.var = var

    def value(self, t):
        return complex(self.expr.ev({self.var: complex(t)}))

    def jet1(self, t, order):
        seed = Jet.variable(1, (t,), order)
        return self.expr.ev({self.var: seed})

    def derivative(self):
        return ClosedForm1D(self.expr.diff(self.var), self.var)


class OdeField1D:
    """Solution y(t) of y^(m) = rhs(t, [y, y', ..., y^(m-1)]) anchored at
    (t0, stack0).  rhs must be generic over jets and complex scalars.

    Trajectory checkpoints are memoized; the only observable effect of the
    cache is speed.
    """

    def __init__(self, order, rhs, t0, stack0, tol=ivp.DEFAULT_TOL,
                 domain=None, name="ode"):
        self.order = order
        self.rhs = rhs
        self.t0 = float(t0)
        self.stack0 = np.asarray(stack0, dtype=np.complex128)
        if self.stack0.shape != (order,):
            raise ValueError("anchor stack length must equal the ODE order")
        self.tol = tol
        self.domain = domain
        self.name = name
        self._cache = {self.t0: self.stack0}

    def _system(self, t, y):
        dy = np.empty_like(y)
        dy[:-1] = y[1:]
        dy[-1] = self.rhs(t, list(y))
        return dy

    def _check_domain(self, t):
        if self.domain is not None:
            lo, hi = self.domain
            if not lo <= t <= hi:
                raise OutOfDomain(
                    f"{self.name}: {t} outside admissible [{lo}, {hi}]")

    def stack_at(self, t):
        t = float(t)
        self._check_domain(t)
        if t in self._cache:
            return self._cache[t]
        t_from = min(self._cache, key=lambda s: abs(s - t))
        y = ivp.integrate_to(self._system, t_from, self._cache[t_from], t,
                             tol=self.tol)
        self._cache[t] = y
        return y

    def value(self, t):
        return complex(self.stack_at(t)[0])

    def jet1(self, t, order):
        """Taylor jet of y at t, extended beyond the state by repeatedly
        reading higher coefficients off the ODE's right-hand side."""
        t = float(np.real(t))
        stack = self.stack_at(t)
        m = self.order
        coeffs = np.zeros(order + 1, dtype=np.complex128)
        for k in range(min(m, order + 1)):
            coeffs[k] = stack[k] / math.factorial(k)
        if order < m:
            return Jet(1, order, (t,), coeffs)
        tj = Jet.variable(1, (t,), order)
        for n in range(m - 1, order):
            # coefficients 0..n of y are correct; read off c_{n+1}
            yj = Jet(1, order, (t,), coeffs)
            ys = [yj]
            for _ in range(m - 1):
                ys.append(ys[-1].derivative().padded(order))
            rj = self.rhs(tj, ys)
            if not isinstance(rj, Jet):
                rj = Jet.constant(rj, 1, (t,), order)
            # rhs coefficient j is y^(m+j)/j!, so c_{m+j} = r_j j!/(m+j)!
            j = n + 1 - m
            coeffs[n + 1] = (rj.coefficient(j) * math.factorial(j)
                             / math.factorial(n + 1))
        return Jet(1, order, (t,), coeffs)

    def derivative(self):
        return Derived1D(self, 1)

    def rebased(self, t):
        """Same solution re-anchored at a trajectory point."""
        return OdeField1D(self.order, self.rhs, t, self.stack_at(t),
                          tol=self.tol, domain=self.domain, name=self.name)


class Derived1D:
    """n-th derivative of another one-variable function object."""

    def __init__(self, base, n):
        while isinstance(base, Derived1D):
            n += base.n
            base = base.base
        self.base = base
        self.n = n

    def value(self, t):
        j = self.base.jet1(t, self.n)
        return complex(j.coefficient(self.n) * math.factorial(self.n))

    def jet1(self, t, order):
        j = self.base.jet1(t, order + self.n)
        for _ in range(self.n):
            j = j.derivative()
        return j

    def derivative(self):
        return Derived1D(self.base, self.n + 1)


def quadrature_field(fn1d, t0, y0=0.0, tol=ivp.DEFAULT_TOL, name="int"):
    """Antiderivative of a one-variable function object, anchored at t0."""

    def rhs(t, ys):
        if isinstance(t, Jet):
            # inner jet of the integrand at the same base point
            return fn1d.jet1(t.value, t.order)
        return fn1d.value(t)

    return OdeField1D(1, rhs, t0, [y0], tol=tol, name=name)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """A coefficient function over named coordinates, with an optional
    admissible region (per-coordinate safe interval)."""

    def __init__(self, expr, domain=None):
        self.expr = as_expr(expr)
        self.domain = domain or {}

    # evaluation ---------------------------------------------------------

    def check(self, env_points):
        for var, (lo, hi) in self.domain.items():
            if var in env_points:
                t = float(np.real(env_points[var]))
                if not lo <= t <= hi:
                    raise OutOfDomain(
                        f"{var}={t} outside admissible [{lo}, {hi}]")

    def jet(self, point, order, vars=None):
        point = tuple(point)
        if vars is None:
            vars = ("u1", "u2")[:len(point)] if len(point) > 1 else ("u2",)
        self.check(dict(zip(vars, point)))
        env = {v: Jet.variable(i + 1, point, order, nvars=len(point))
               for i, v in enumerate(vars)}
        out = self.expr.ev(env)
        if not isinstance(out, Jet):
            out = Jet.constant(out, len(point), point, order)
        return out

    def value(self, point, vars=None):
        point = tuple(point)
        if vars is None:
            vars = ("u1", "u2")[:len(point)] if len(point) > 1 else ("u2",)
        self.check(dict(zip(vars, point)))
        out = self.expr.ev(dict(zip(vars, point)))
        return complex(out)

    def __call__(self, *point):
        return self.value(point)

    def derivative(self, var):
        if var in (1, 2):
            var = f"u{var}"
        return ScalarField(self.expr.diff(var), domain=self.domain)

    # arithmetic ---------------------------------------------------------

    def _wrap(self, expr, other=None):
        dom = dict(self.domain)
        if isinstance(other, ScalarField):
            for k, v in other.domain.items():
                if k in dom:
                    dom[k] = (max(dom[k][0], v[0]), min(dom[k][1], v[1]))
                else:
                    dom[k] = v
        return ScalarField(expr, domain=dom)

    def __add__(self, other):
        return self._wrap(self.expr + as_expr(other), other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.expr - as_expr(other), other)

    def __rsub__(self, other):
        return self._wrap(as_expr(other) - self.expr, other)

    def __neg__(self):
        return self._wrap(-self.expr)

    def __mul__(self, other):
        return self._wrap(self.expr * as_expr(other), other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.expr / as_expr(other), other)

    def __rtruediv__(self, other):
        return self._wrap(as_expr(other) / self.expr, other)

    def is_zero(self):
        return _is_const(self.expr, 0)

    # serialization ------------------------------------------------------

    def to_json(self):
        return self.expr.to_json()

    @classmethod
    def from_json(cls, obj, domain=None, func1_registry=None):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(expr_from_json(obj, func1_registry), domain=domain)


ZERO = ScalarField(Const(0))
ONE = ScalarField(Const(1))


def field_jet(f, point, order):
    """Spec-facing wrapper: jet of f at a point (1 or 2 coordinates)."""
    return f.jet(point, order)


# ---------------------------------------------------------------------------
# ODE-backed constructions
# ---------------------------------------------------------------------------

class OdeTaylorSpec:
    """Defining data for an ODE-backed one-variable field: highest
    derivative expressed in the lower ones, plus anchor data."""

    def __init__(self, order, rhs, anchor_t, anchor_stack, var="u2",
                 consistency=None, tol=ivp.DEFAULT_TOL, domain=None,
                 name="ode"):
        self.order = order
        self.rhs = rhs
        self.anchor_t = anchor_t
        self.anchor_stack = list(anchor_stack)
        self.var = var
        self.consistency = consistency
        self.tol = tol
        self.domain = domain
        self.name = name


def field_from_taylor_recurrence(spec, check_tol=1e-7):
    """Build a ScalarField from an OdeTaylorSpec, verifying the anchor
    against the optional defining relation."""
    if spec.consistency is not None:
        res = abs(spec.consistency(spec.anchor_t, spec.anchor_stack))
        if res > check_tol:
            raise InconsistentAnchor(
                f"{spec.name}: anchor residual {res:.3e} > {check_tol:.0e}")
    fn = OdeField1D(spec.order, spec.rhs, spec.anchor_t, spec.anchor_stack,
                    tol=spec.tol, domain=spec.domain, name=spec.name)
    field = ScalarField(Func1(fn, Var(spec.var), name=spec.name))
    field.fn1d = fn
    return field


def wp_rhs(g2):
    """Second-derivative form of the Weierstrass defining equation:
    p'' = 6 p^2 - g2/2."""

    def rhs(t, ys):
        return 6.0 * ys[0] * ys[0] - g2 / 2.0

    return rhs


def wp_consistency(g2, g3):
    def check(t, stack):
        p, dp = stack
        return dp * dp - (4 * p ** 3 - g2 * p - g3)

    return check


def wp_field(g2, g3, anchor_t, anchor_p, anchor_dp, var="u2",
             tol=1e-12, name="wp"):
    """ODE-backed Weierstrass p-function from invariants and a consistent
    anchor (p, p') at anchor_t."""
    spec = OdeTaylorSpec(2, wp_rhs(g2), anchor_t, [anchor_p, anchor_dp],
                         var=var, consistency=wp_consistency(g2, g3),
                         tol=tol, name=name)
    return field_from_taylor_recurrence(spec)


def wp_degenerate_invariants(e1, kind):
    """(g2, g3) of the two-coincident-root degenerations: the trigonometric
    form carries (12 e1^2, 8 e1^3), the hyperbolic one (12 e1^2, -8 e1^3);
    they map onto each other under e1 -> -e1."""
    if kind == "trig":
        return 12 * e1 ** 2, 8 * e1 ** 3
    if kind == "csch":
        return 12 * e1 ** 2, -8 * e1 ** 3
    raise ValueError(f"unknown degeneration kind {kind!r}")


def wp_trig_expr(e1, z0=0.0, var=u2):
    """3 e1 csc^2(sqrt(3 e1) (z - z0)) - e1, the trigonometric degeneration
    with invariants (12 e1^2, 8 e1^3)."""
    k = np.sqrt(complex(3 * e1))
    return 3 * e1 * Pow(sin(k * (var - z0)), -2) - e1


def wp_csch_expr(e1, z0=0.0, var=u2):
    """3 e1 csch^2(sqrt(3 e1) (z - z0)) + e1, the hyperbolic degeneration
    with invariants (12 e1^2, -8 e1^3)."""
    k = np.sqrt(complex(3 * e1))
    return 3 * e1 * Pow(sinh(k * (var - z0)), -2) + e1


def wp_rational_expr(z0=0.0, var=u2):
    """(z - z0)^-2, the rational degeneration (g2 = g3 = 0)."""
    return Pow(var - z0, -2)


def wp_trig_anchor(e1, z0, t):
    """(p, p') of the trigonometric degeneration at t, for anchoring the
    ODE-backed field."""
    f = ClosedForm1D(wp_trig_expr(e1, z0))
    j = f.jet1(t, 1)
    return complex(j.coefficient(0)), complex(j.coefficient(1))
