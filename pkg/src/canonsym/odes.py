"""Named scalar ODEs, their first integrals, and 1D spectral utilities.

Every nonlinear determining equation that appears in the classification is
registered here under a stable id, as a residual form over a derivative
stack.  Equations with a single unknown can be integrated numerically (the
highest derivative is solved for by linearity); first integrals are
evaluated along trajectories and their conservation spread reported.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from . import ivp
from .canonical import ResidualReport
from .errors import (
    ConditionViolated,
    QuadratureFailure,
    SingularLeadingCoefficient,
    StepCollapse,
    UnknownEquationId,
    UnresolvedSpectrum,
)

_LEAD_FLOOR = 1e-9


class NamedEquation:
    """A named residual form over derivative stacks.

    `residual(u, stacks, params)` receives the independent variable, a dict
    mapping unknown names to derivative sequences (value, first derivative,
    ...), and the merged parameter dict.  `kind` is "ode" for equation
    displays and "integral" for conserved quantities (whose residual value
    is the integral itself).  Single-unknown "ode" equations are integrable;
    the highest derivative is recovered by linearity of the residual in it.
    """

    def __init__(self, id, unknowns, orders, params, residual, kind="ode",
                 exclusions=None, doc=""):
        self.id = id
        self.unknowns = tuple(unknowns)
        self.orders = dict(orders)
        self.params = dict(params)
        self.residual = residual
        self.kind = kind
        self.exclusions = exclusions  # params -> list of singular centers
        self.doc = doc

    @property
    def primary(self):
        return self.unknowns[0]

    @property
    def order(self):
        return self.orders[self.primary]

    def merged(self, params):
        p = dict(self.params)
        for k, v in (params or {}).items():
            if k not in p:
                raise KeyError(f"{self.id}: unknown parameter {k!r}")
            p[k] = v
        return p

    def _split(self, u, y, p, top):
        stacks = {self.primary: list(y) + [top]}
        return self.residual(u, stacks, p)

    def lead(self, u, y, p):
        """Coefficient of the highest derivative at state y (linearity)."""
        return self._split(u, y, p, 1.0) - self._split(u, y, p, 0.0)

    def top(self, u, y, p):
        """Highest derivative solved from residual = 0."""
        r0 = self._split(u, y, p, 0.0)
        lead = self._split(u, y, p, 1.0) - r0
        if abs(lead) < _LEAD_FLOOR:
            raise SingularLeadingCoefficient(
                f"{self.id}: leading coefficient {abs(lead):.3e} at u={u}")
        return -r0 / lead


class Trajectory:
    """Dense solution of a named single-unknown equation.

    `stack(t)` returns derivatives of the unknown through the equation
    order: the state supplies value .. order-1, the equation supplies the
    top derivative.
    """

    def __init__(self, eq, params, sol, span, tol):
        self.eq = eq
        self.params = params
        self.sol = sol
        self.span = tuple(span)
        self.tol = tol
        self.ts = np.asarray(sol.t)
        self.nfev = int(sol.nfev)

    def grid(self, n=20, margin=0.0):
        a, b = self.span
        d = margin * (b - a)
        return np.linspace(a + d, b - d, n)

    def state(self, t):
        return np.asarray(self.sol.sol(t), dtype=np.complex128)

    def stack(self, t):
        y = self.state(t)
        return list(y) + [self.eq.top(t, y, self.params)]

    def self_residual(self, n=20, h=None):
        """Max relative residual of the defining equation along the span,
        with the highest derivative recomputed independently by central
        finite differences of the dense output (the solved-for top
        derivative would make the residual trivially zero)."""
        a, b = self.span
        if h is None:
            h = 5e-4 * (b - a)
        m = self.eq.order
        worst = 0.0
        for t in self.grid(n, margin=0.05):
            s = list(self.state(t))
            f = [self.state(t + k * h)[m - 1] for k in (-2, -1, 1, 2)]
            top = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
            s.append(top)
            r = self.eq.residual(t, {self.eq.primary: s}, self.params)
            scale = max(1.0, max(abs(complex(v)) for v in s))
            worst = max(worst, abs(r) / scale)
        return worst

    def to_csv(self, n=40):
        m = self.eq.order
        hdr = ",".join(["u"] + [f"d{k}" for k in range(m + 1)])
        lines = [hdr]
        for t in self.grid(n):
            s = self.stack(t)
            lines.append(",".join([f"{t:.17g}"] +
                                  [f"{complex(v).real:.17g}" for v in s]))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# equation table
# ---------------------------------------------------------------------------

def _build_table():
    eqs = {}

    def add(id, unknowns, orders, params, residual, kind="ode",
            exclusions=None, doc=""):
        eqs[id] = NamedEquation(id, unknowns, orders, params, residual,
                                kind=kind, exclusions=exclusions, doc=doc)

    # -- polar-separation determining conditions ---------------------------
    add("cond1", ("U2", "V2"), {"U2": 2, "V2": 1}, {"a4": 0.0},
        lambda u, s, p: p["a4"] * s["V2"][1] + 2 * s["U2"][2],
        doc="angular condition linking U2'' to the potential slope")

    add("cond2", ("U2", "V2"), {"U2": 4, "V2": 1},
        {"a4": 0.0, "hbar": 1.0},
        lambda u, s, p: (p["hbar"] ** 2 * s["U2"][4]
                         + 4 * p["a4"] * s["V2"][1] * s["V2"][0]
                         - 4 * s["V2"][1] * s["U2"][1]))

    add("cond3", ("U1", "V2"), {"U1": 2, "V2": 1}, {},
        lambda u, s, p: (8 * s["V2"][0] * np.cos(u)
                         + 4 * s["V2"][1] * np.sin(u)
                         - s["U1"][2] - s["U1"][0]))

    add("cond4", ("V2", "U1"), {"V2": 3, "U1": 1}, {"hbar": 1.0},
        lambda u, s, p: (
            s["V2"][1] * s["U1"][1]
            - p["hbar"] ** 2 * s["V2"][3] * np.sin(u)
            - 4 * p["hbar"] ** 2 * s["V2"][2] * np.cos(u)
            + 2 * np.sin(u) * (p["hbar"] ** 2 + 4 * s["V2"][0]) * s["V2"][1]
            + 2 * s["V2"][0] * (6 * p["hbar"] ** 2 * np.cos(u)
                                + 8 * s["V2"][0] * np.cos(u)
                                - s["U1"][0])))

    # -- angular-potential master equations --------------------------------
    def pvi_res(u, s, p):
        h2 = p["hbar"] ** 2
        W = s["W"]
        sn, cs = np.sin(u), np.cos(u)
        return (h2 * (sn * W[4] + 4 * cs * W[3] - 6 * sn * W[2]
                      - 4 * cs * W[1])
                - 12 * sn * W[1] * W[2] - 4 * cs * W[0] * W[2]
                - 4 * (p["beta1"] * sn - p["beta2"] * cs) * W[2]
                - 16 * cs * W[1] ** 2 + 8 * sn * W[0] * W[1]
                - 8 * (p["beta1"] * cs + p["beta2"] * sn) * W[1])

    add("pvi", ("W",), {"W": 4}, {"hbar": 1.0, "beta1": 0.0, "beta2": 0.0},
        pvi_res,
        exclusions=lambda p: [k * np.pi for k in range(-8, 9)],
        doc="fourth-order potential equation whose solutions are sixth "
            "Painleve transcendents; V2 = W'")

    add("weierstrass", ("V",), {"V": 3}, {"hbar": 1.0, "a1": 0.0},
        lambda u, s, p: (p["hbar"] ** 2 * s["V"][3]
                         - 12 * s["V"][1] * s["V"][0]
                         + 12 * p["a1"] * s["V"][1]),
        doc="third-order equation solved by h^2 wp(u - u0) + a1")

    add("hcond5", ("V",), {"V": 3}, {"hbar": 1.0, "a1": 0.0},
        lambda u, s, p: (p["hbar"] ** 2 * s["V"][3]
                         - 12 * s["V"][0] * s["V"][1]
                         + 12 * p["a1"] * s["V"][1]))

    add("wp_defining", ("P",), {"P": 1}, {"g2": 0.0, "g3": 0.0},
        lambda u, s, p: (s["P"][1] ** 2
                         - (4 * s["P"][0] ** 3 - p["g2"] * s["P"][0]
                            - p["g3"])),
        kind="integral",
        doc="defining relation of wp; conserved (== 0) for the true wp")

    # -- horocyclic determining conditions ---------------------------------
    add("hcond1", ("U1", "V2"), {"U1": 2, "V2": 1}, {"a8": 0.0},
        lambda u, s, p: p["a8"] * s["V2"][1] + 2 * s["U1"][2])

    add("hcond2", ("V2", "U1"), {"V2": 3, "U1": 1},
        {"a8": 0.0, "hbar": 1.0},
        lambda u, s, p: (0.5 * p["hbar"] ** 2 * p["a8"] * s["V2"][3]
                         - 4 * p["a8"] * s["V2"][1] * s["V2"][0]
                         + 4 * s["V2"][1] * s["U1"][1]))

    add("hcond3", ("U2", "V2", "U1"), {"U2": 2, "V2": 1, "U1": 0},
        {"a8": 0.0, "a9": 0.0, "a10": 0.0},
        lambda u, s, p: (
            (2 * p["a10"] - 2 * p["a9"] * u - p["a8"] * u ** 2) * s["V2"][1]
            - 4 * (p["a9"] + p["a8"] * u) * s["V2"][0]
            + 4 * s["U1"][0] + 4 * s["U2"][2]))

    def hcond4_res(u, s, p, flagged=True):
        h2 = p["hbar"] ** 2
        a8, a9, a10 = p["a8"], p["a9"], p["a10"]
        V, U1, U2 = s["V2"], s["U1"], s["U2"]
        r = (-2 * h2 * a8 * u ** 2 * V[1]
             + 16 * (a9 + a8 * u) * V[0] ** 2
             - 4 * (2 * a10 - 2 * a9 * u + a8 * u ** 2) * V[1] * V[0]
             + 0.5 * h2 * (2 * a10 - 2 * a9 * u - a8 * u ** 2) * V[3]
             - 16 * V[0] * U1[0] + 8 * V[1] * U2[1])
        if flagged:
            # the V[2] factor completes the term so that, with U1 constant
            # and U2' integrated from hcond3, the condition reduces exactly
            # to -4x the fourth-order equation "horo_nl"
            r = r - 4 * h2 * (a9 + a8 * u) * V[2]
        return r

    hpar = {"a8": 0.0, "a9": 0.0, "a10": 0.0, "hbar": 1.0}
    add("hcond4", ("V2", "U1", "U2"), {"V2": 3, "U1": 0, "U2": 1},
        dict(hpar), hcond4_res)
    add("hcond4_noflag", ("V2", "U1", "U2"), {"V2": 3, "U1": 0, "U2": 1},
        dict(hpar), lambda u, s, p: hcond4_res(u, s, p, flagged=False),
        doc="hcond4 with the flagged second-derivative term dropped")

    def horo_nl_res(u, s, p):
        h2 = p["hbar"] ** 2
        a9, a10, d1, d3 = p["a9"], p["a10"], p["d1"], p["d3"]
        W = s["W"]
        return (-4 * a9 * W[1] ** 2
                + ((3 * a10 - 3 * a9 * u) * W[2] + 4 * d1) * W[1]
                + (-a9 * W[0] + 2 * d1 * u - 2 * d3) * W[2]
                + h2 * a9 * W[3]
                - 0.25 * h2 * (a10 - a9 * u) * W[4])

    add("horo_nl", ("W",), {"W": 4},
        {"hbar": 1.0, "a9": 0.0, "a10": 0.0, "d1": 0.0, "d3": 0.0},
        horo_nl_res,
        doc="fourth-order horocyclic potential equation; V2 = W'")

    def chazy_J_val(u, s, p):
        h2 = p["hbar"] ** 2
        a9, a10, d1, d3 = p["a9"], p["a10"], p["d1"], p["d3"]
        W = s["W"]
        m = a10 - a9 * u
        return (0.25 * h2 * m ** 2 * W[3]
                - 0.5 * a9 * h2 * m * W[2]
                - 1.5 * m ** 2 * W[1] ** 2
                + a9 * m * W[0] * W[1]
                + (2 * a9 * d1 * u ** 2 - 2 * (a10 * d1 + a9 * d3) * u
                   + 2 * a10 * d3 - 0.5 * a9 ** 2 * h2) * W[1]
                + 0.5 * a9 ** 2 * W[0] ** 2
                + (2 * a9 * d3 - 2 * a10 * d1) * W[0])

    add("chazy_J", ("W",), {"W": 3},
        {"hbar": 1.0, "a9": 0.0, "a10": 0.0, "d1": 0.0, "d3": 0.0},
        chazy_J_val, kind="integral",
        doc="first integral of horo_nl (integrating factor u a9 - a10)")

    def msw_res(u, s, p):
        al, h2 = p["alpha"], p["hbar"] ** 2
        b0, b1, c1, c2 = p["b0"], p["b1"], p["c1"], p["c2"]
        a1, a2, k2, k4 = p["a1"], p["a2"], p["k2"], p["k4"]
        W = s["W"]
        return (al * h2 * W[3] - 6 * al * W[1] ** 2
                - 4 * (c1 * u ** 3 - al * c2 * u ** 2 + b1 * u + b0) * W[1]
                - 4 * (3 * c1 * u ** 2 - 2 * c2 * al * u + b1) * W[0]
                - (2.0 / 3.0) * c2 ** 2 * al * u ** 4
                + 4 * (c2 * b1 / 3.0 - c1 * a2) * u ** 3
                - 2 * (3 * c1 * a1 - 2 * c2 * b0) * u ** 2
                + k2 * u + k4)

    mpar = {"hbar": 1.0, "alpha": 1.0, "b0": 0.0, "b1": 0.0, "c1": 0.0,
            "c2": 0.0, "a1": 0.0, "a2": 0.0, "k2": 0.0, "k4": 0.0}
    add("msw", ("W",), {"W": 3}, dict(mpar), msw_res,
        doc="third-order equation (cubic-coefficient family); the "
            "zero-cubic sector is the a9 = 0 horocyclic case")

    def msw_J_val(u, s, p):
        if p["c1"] != 0 or p["c2"] != 0:
            raise ConditionViolated(
                "msw_J requires the zero-cubic sector c1 = c2 = 0")
        al, h2 = p["alpha"], p["hbar"] ** 2
        b0, b1, k2, k4 = p["b0"], p["b1"], p["k2"], p["k4"]
        W = s["W"]
        return (al ** 2 * h2 * W[2] ** 2 + 2 * al * b1 * h2 * W[2]
                - 4 * al ** 2 * W[1] ** 3
                - 4 * al * (b1 * u + b0) * W[1] ** 2
                - 8 * al * b1 * W[0] * W[1]
                + 2 * al * (k2 * u + k4) * W[1]
                - 2 * al * k2 * W[0]
                - 8 * b1 * (b1 * u + b0) * W[0]
                + b1 * k2 * u ** 2 + 2 * b1 * k4 * u)

    add("msw_J", ("W",), {"W": 2}, dict(mpar), msw_J_val, kind="integral",
        doc="first integral of msw, quadratic in W''")

    # -- algebraically dependent pairs: defining equations -----------------
    add("sys31", ("V",), {"V": 4}, {"hbar": 1.0},
        lambda u, s, p: (p["hbar"] ** 2 * (-s["V"][1] * s["V"][4]
                                           + s["V"][2] * s["V"][3])
                         + 12 * s["V"][1] ** 3),
        doc="general potential equation of the vanishing-commutator class")

    def sys31a_res(u, s, p):
        h = p["hbar"]
        val = (h ** 3 * s["V"][3] - 12 * h * s["V"][0] * s["V"][1])
        if p["z1"] is None:
            return val / (4 * s["V"][1])   # extracted constant
        return val - 4 * p["z1"] * s["V"][1]

    add("sys31a", ("V",), {"V": 3}, {"hbar": 1.0, "z1": None}, sys31a_res,
        kind="auto",
        doc="first integral of sys31; with z1 unset the conserved constant "
            "itself is reported")

    add("bc3", ("V",), {"V": 3}, {"hbar": 1.0, "b1": 0.0},
        lambda u, s, p: (-4 * p["b1"] * s["V"][1] * p["hbar"] ** 2
                         - s["V"][3] * p["hbar"] ** 2
                         + 12 * s["V"][0] * s["V"][1]),
        doc="third-order commuting-pair condition (cubic operator)")

    add("bc5", ("V",), {"V": 5}, {"hbar": 1.0, "c1": 0.0},
        lambda u, s, p: (16 * p["c1"] * s["V"][1] * p["hbar"] ** 4
                         + s["V"][5] * p["hbar"] ** 4
                         - 20 * s["V"][0] * s["V"][3] * p["hbar"] ** 2
                         - 40 * s["V"][1] * s["V"][2] * p["hbar"] ** 2
                         + 120 * s["V"][0] ** 2 * s["V"][1]),
        doc="fifth-order commuting-pair condition (quintic operator)")

    def bc5_Q(u, s, p):
        h2 = p["hbar"] ** 2
        V = s["V"]
        return (h2 ** 2 * V[4] - 20 * h2 * V[0] * V[2]
                - 10 * h2 * V[1] ** 2 + 40 * V[0] ** 3
                + 16 * p["c1"] * h2 ** 2 * V[0])

    def bc5_E(u, s, p, K0):
        h2 = p["hbar"] ** 2
        V = s["V"]
        return (h2 ** 2 * (V[3] * V[1] - 0.5 * V[2] ** 2)
                - 10 * h2 * V[0] * V[1] ** 2 + 10 * V[0] ** 4
                + 8 * p["c1"] * h2 ** 2 * V[0] ** 2 - K0 * V[0])

    add("bc5_int", ("V",), {"V": 4}, {"hbar": 1.0, "c1": 0.0},
        bc5_Q, kind="integral",
        doc="double integration of bc5; first stage Q, second stage E with "
            "the fitted constant K0 (handled in named_residual)")
    eqs["bc5_int"]._second_stage = bc5_E

    # -- raising-operator potential ----------------------------------------
    add("raising", ("V",), {"V": 3}, {"c": 1.0},
        lambda u, s, p: (8 * s["V"][0] + 4 * u * s["V"][1]
                         + 6 * p["c"] * s["V"][0] * s["V"][1]
                         + p["c"] * s["V"][3]),
        doc="third-order potential equation of the raising-operator system")

    def raising_c1_val(u, s, p):
        c = p["c"]
        V = s["V"]
        bracket = (2 * c * (c * V[0] + 2 * u) * V[2]
                   + 4 * c ** 2 * V[0] ** 3 + 16 * c * u * V[0] ** 2
                   - c ** 2 * V[1] ** 2 + 16 * u ** 2 * V[0]
                   - 4 * c * V[1])
        return -bracket / (2 * c)

    add("raising_c1", ("V",), {"V": 2}, {"c": 1.0}, raising_c1_val,
        kind="integral",
        doc="conserved constant of the raising equation")

    return eqs


EQUATIONS = _build_table()


def get_equation(id):
    try:
        return EQUATIONS[id]
    except KeyError:
        raise UnknownEquationId(f"no named equation {id!r}") from None


def list_equations():
    return sorted(EQUATIONS)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def integrate(eq, initial, span, params=None, tol=ivp.DEFAULT_TOL):
    """Integrate a single-unknown named equation over a span.

    `initial` is the derivative stack (value .. order-1 derivative) at
    span[0].  Raises SingularLeadingCoefficient if the span touches a
    declared singular neighborhood or the leading coefficient vanishes at
    the start.
    """
    if isinstance(eq, str):
        eq = get_equation(eq)
    if eq.kind == "integral":
        raise ValueError(f"{eq.id} is a first integral, not integrable")
    if len(eq.unknowns) != 1:
        raise ValueError(f"{eq.id} couples several unknowns; "
                         "integrate applies to single-unknown equations")
    p = eq.merged(params)
    a, b = float(span[0]), float(span[1])
    if eq.exclusions is not None:
        for c in eq.exclusions(p):
            if min(a, b) - 0.1 < c < max(a, b) + 0.1:
                raise SingularLeadingCoefficient(
                    f"{eq.id}: span {span} enters the excluded "
                    f"neighborhood |u - {c:.4g}| < 0.1")
    y0 = np.asarray(initial, dtype=np.complex128)
    if len(y0) != eq.order:
        raise ValueError(f"{eq.id}: initial stack must have length "
                         f"{eq.order}")
    eq.top(a, y0, p)  # singular-leading check at the anchor

    def rhs(t, y):
        return np.concatenate([y[1:], [eq.top(t, y, p)]])

    sol = ivp.integrate_dense(rhs, a, y0, b, tol=tol)
    return Trajectory(eq, p, sol, (a, b), tol)


# ---------------------------------------------------------------------------
# residual evaluation
# ---------------------------------------------------------------------------

def _stack_from_fn(fn, t, depth):
    j = fn.jet1(t, depth)
    if not hasattr(j, "coefficient"):      # constant function
        return [complex(j)] + [0.0] * depth
    return [j.coefficient(k) * math.factorial(k) for k in range(depth + 1)]


def _stacks_at(eq, fns, t):
    if isinstance(fns, Trajectory):
        return {eq.primary: fns.stack(t)}
    if not isinstance(fns, dict):
        fns = {eq.primary: fns}
    out = {}
    for name in eq.unknowns:
        if name not in fns:
            raise KeyError(f"{eq.id}: missing function {name!r}")
        out[name] = _stack_from_fn(fns[name], t, eq.orders[name])
    return out


def named_residual(id, fns, params=None, points=None):
    """Evaluate a named equation display (or first integral) pointwise.

    `fns` is a Trajectory, a single 1-var function object (with
    jet1(t, order)), or a dict of named function objects.  For equation
    displays the report holds |residual| per point; for first integrals it
    holds the integral's value per point, with `values` and `spread`
    attributes measuring conservation.
    """
    eq = get_equation(id)
    p = eq.merged(params)
    if points is None:
        if isinstance(fns, Trajectory):
            points = fns.grid(20, margin=0.02)
        else:
            raise ValueError("points required unless fns is a Trajectory")
    points = [float(t) for t in points]

    as_integral = eq.kind == "integral" or (
        eq.kind == "auto" and p.get("z1") is None)

    vals = []
    rep = ResidualReport()
    if id == "bc5_int":
        stacks = [_stacks_at(eq, fns, t) for t in points]
        Q = [eq.residual(t, s, p) for t, s in zip(points, stacks)]
        K0 = np.mean(Q)
        vals = [eq._second_stage(t, s, p, K0)
                for t, s in zip(points, stacks)]
    else:
        for t in points:
            s = _stacks_at(eq, fns, t)
            vals.append(eq.residual(t, s, p))

    if as_integral:
        center = np.mean(vals)
        for t, v in zip(points, vals):
            rep.add((t,), eq.id, v - center)
        rep.values = [complex(v) for v in vals]
        rep.spread = float(max(abs(v - w) for v in vals for w in vals)) \
            if len(vals) > 1 else 0.0
        rep.scale = max(1.0, max(abs(complex(v)) for v in vals))
    else:
        scale = 1.0
        for t, v in zip(points, vals):
            rep.add((t,), eq.id, v)
            s = _stacks_at(eq, fns, t)
            mag = max((abs(complex(d)) for st in s.values() for d in st),
                      default=1.0)
            scale = max(scale, mag)
        rep.scale = scale
    return rep


# ---------------------------------------------------------------------------
# Cole-Hopf linearization check
# ---------------------------------------------------------------------------

def cole_hopf_check(traj, hbar, n=120):
    """Verify that the log-derivative substitution W = -hbar^2 U'/U turns
    the trajectory into a solution of a second-order linear equation
    U'' + p(u) U' + q(u) U = 0 with deg(p) = 1, deg(q) = 2.

    Equivalently (and this is the overdetermined form actually fitted) the
    trajectory must satisfy the Riccati relation
    W' - W^2/hbar^2 = -p(u) W + hbar^2 q(u), i.e. W' - W^2/hbar^2 lies in
    span{W, uW, 1, u, u^2}.  U itself is produced by quadrature and stored
    on the report.  Only a codimension-one family of trajectories of the
    parent third-order equation is linearizable (see cole_hopf_seed);
    generic trajectories and arbitrary smooth profiles fail the fit.
    """
    h2 = complex(hbar) ** 2
    a, b = traj.span

    def rhs(t, y):
        W = traj.state(t)[0]
        return [-W * y[0] / h2]

    try:
        usol = ivp.integrate_dense(rhs, a, [1.0], b,
                                   tol=min(traj.tol, 1e-10))
    except StepCollapse as exc:
        raise QuadratureFailure(str(exc)) from exc

    ts = np.linspace(a, b, n)
    Wv = np.array([traj.state(t)[0] for t in ts])
    W1 = np.array([traj.state(t)[1] for t in ts])
    y = W1 - Wv ** 2 / h2
    M = np.stack([Wv, ts * Wv, np.ones(n), ts, ts ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = M @ coef - y
    scale = max(1.0, float(np.max(np.abs(y))))
    rep = ResidualReport(scale=scale)
    for t, r in zip(ts, resid):
        rep.add((t,), "cole_hopf", r)
    # -p W - p1 u W + h^2(q0 + q1 u + q2 u^2) identification
    rep.fit = {"p": [-coef[0], -coef[1]],
               "q": [coef[2] / h2, coef[3] / h2, coef[4] / h2]}
    rep.U = np.array([usol.sol(t)[0] for t in ts])
    return rep


def cole_hopf_seed(alpha, b0, p0, p1, W0, hbar=1.0, u0=0.0):
    """Initial data and parameters for a linearizable trajectory of the
    zero-cubic third-order equation.

    The sector b1 = 0, k2 = 0, k4 = (3/2) alpha hbar^4 p1^2 + 2 b0 hbar^2 p1
    preserves the Riccati manifold W' = W^2/hbar^2 - (p1 u + p0) W
    + hbar^2 q(u) with q determined by (p0, p1, b0); trajectories seeded on
    the manifold stay on it and pass cole_hopf_check at integrator
    accuracy.  Returns (initial_stack, params) for integrate("msw", ...).
    """
    h = complex(hbar) ** 2
    k4 = 1.5 * alpha * h ** 2 * p1 ** 2 + 2 * b0 * h * p1
    q2 = p1 ** 2 / 4
    q1 = p0 * p1 / 2
    q0 = (p0 ** 2 - 4 * p1) / 4 - b0 / (alpha * h)

    def p(u):
        return p1 * u + p0

    def q(u):
        return q2 * u ** 2 + q1 * u + q0

    def phi(u, W):
        return W ** 2 / h - p(u) * W + h * q(u)

    W1 = phi(u0, W0)
    W2 = (-p1 * W0 + h * (2 * q2 * u0 + q1)
          + (2 * W0 / h - p(u0)) * W1)
    params = {"alpha": alpha, "b0": b0, "b1": 0.0, "k2": 0.0,
              "k4": complex(k4).real if complex(k4).imag == 0 else k4,
              "hbar": hbar}
    return [W0, W1, W2], params


# ---------------------------------------------------------------------------
# finite-difference spectrum
# ---------------------------------------------------------------------------

def _potential_values(V, xs):
    if callable(getattr(V, "value", None)):
        try:
            return np.array([V.value(float(x)) for x in xs], dtype=float)
        except TypeError:
            return np.array([V.value((float(x),)) for x in xs], dtype=float)
    return np.array([V(float(x)) for x in xs], dtype=float)


def _fd_eigs(V, a, b, n, count):
    h = (b - a) / (n + 1)
    xs = a + h * np.arange(1, n + 1)
    diag = 2.0 / h ** 2 + _potential_values(V, xs)
    off = np.full(n - 1, -1.0 / h ** 2)
    return eigh_tridiagonal(diag, off, select="i",
                            select_range=(0, count - 1),
                            eigvals_only=True)


def fd_spectrum(V, interval, n_points, count, shift_tol=5e-2):
    """Lowest `count` Dirichlet eigenvalues of -d^2/dx^2 + V on the
    interval, by symmetric tridiagonal finite differences at n and 2n
    points with Richardson extrapolation.  Raises UnresolvedSpectrum when
    eigenvalues shift too much under grid refinement."""
    a, b = float(interval[0]), float(interval[1])
    e1 = _fd_eigs(V, a, b, int(n_points), count)
    e2 = _fd_eigs(V, a, b, 2 * int(n_points), count)
    shift = np.max(np.abs(e2 - e1) / np.maximum(1.0, np.abs(e2)))
    if shift > shift_tol:
        raise UnresolvedSpectrum(
            f"eigenvalue shift {shift:.3e} under grid doubling exceeds "
            f"{shift_tol:.1e}; refine n_points or shrink the interval")
    return list((4 * e2 - e1) / 3)


# ---------------------------------------------------------------------------
# quintic-condition change of variables
# ---------------------------------------------------------------------------

def fif3_residual(stack, alpha):
    """Residual of u''''' = 20 u u''' + 40 u' u'' - 120 u^2 u' + alpha u'
    on a derivative stack (value .. fifth derivative)."""
    u = stack
    return (u[5] - 20 * u[0] * u[3] - 40 * u[1] * u[2]
            + 120 * u[0] ** 2 * u[1] - alpha * u[1])


def fif3_c1(alpha, hbar):
    """The quintic-condition constant c1 matching the scaled form above
    under V0(y) = u(x), y = hbar x."""
    return -alpha / (16 * complex(hbar) ** 4)
