"""Numerical search for symmetries and algebra-relation fitting.

The determining equations are linear in the symmetry data
(F0, G0, GH, GL) once the potential is fixed, so symmetry search is a
nullspace problem: evaluate the nine determining equations for each basis
field at collocation points, stack the columns, and read candidates off the
small singular values.  Known-trivial directions (constants in the G slots,
which produce polynomials in H and L) are deflated before reporting.

Structure constants of operator algebra relations ([A,C], [B,C], closure
identities) are fitted by least squares on flattened coefficient jets.
"""

from __future__ import annotations

import numpy as np

from .canonical import (
    ResidualReport,
    assemble_and_verify,
    det3_printed,
    fg_polys,
)
from .diffop import DiffOp, OpJet
from .errors import BasisDegenerate, NoCandidate, RankDeficientFit
from .fields import ScalarField, as_expr
from .jets import Jet

SLOTS = ("F0", "G0", "GH", "GL")
#: slots allowed for a requested symmetry order: constants in G raise the
#: expanded operator order by composing with H or L
SLOTS_BY_ORDER = {1: ("G0",), 2: ("F0", "G0"), 3: SLOTS}


def _field(x):
    if isinstance(x, ScalarField):
        return x
    return ScalarField(as_expr(x))


class BasisSpec:
    """Per-slot lists of ansatz basis fields."""

    def __init__(self, F0=(), G0=(), GH=(), GL=()):
        self.fields = {"F0": [_field(b) for b in F0],
                       "G0": [_field(b) for b in G0],
                       "GH": [_field(b) for b in GH],
                       "GL": [_field(b) for b in GL]}

    @property
    def size(self):
        return sum(len(v) for v in self.fields.values())

    def labels(self):
        return [(slot, i) for slot in SLOTS
                for i in range(len(self.fields[slot]))]

    def check_independence(self, points, cond_max=1e10):
        """Per-slot numerical linear independence on sample points."""
        for slot, basis in self.fields.items():
            if len(basis) < 2:
                continue
            M = np.array([[b.value(pt) for b in basis] for pt in points])
            sv = np.linalg.svd(M, compute_uv=False)
            if sv[0] == 0.0 or sv[-1] < sv[0] / cond_max:
                raise BasisDegenerate(
                    f"slot {slot}: basis condition exceeds {cond_max:.1e}")

    def combine(self, coeffs, drop_tol=1e-12):
        """Map a flat coefficient vector to the four ansatz fields."""
        out = {}
        idx = 0
        top = max((abs(c) for c in coeffs), default=1.0) or 1.0
        for slot in SLOTS:
            total = _field(0.0)
            for b in self.fields[slot]:
                c = complex(coeffs[idx])
                idx += 1
                if abs(c) > drop_tol * top:
                    total = total + c * b
            out[slot] = total
        return out


class SymmetryAnsatz:
    """A candidate symmetry in (F0, G0, GH, GL) form with its coefficient
    vector over the search basis."""

    def __init__(self, basis, coeffs):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=np.complex128)
        parts = basis.combine(self.coeffs)
        self.F0 = parts["F0"]
        self.G0 = parts["G0"]
        self.GH = parts["GH"]
        self.GL = parts["GL"]

    def fg(self):
        return fg_polys(self.F0, self.G0, self.GH, self.GL)

    def verify(self, sys, points=None, order=10, tol=1e-7):
        F, G = self.fg()
        return assemble_and_verify(sys, F, G, points=points, order=order,
                                   tol=tol)


class NullspaceResult:
    """Raw SVD output of the collocation problem."""

    def __init__(self, singular_values, vectors, residuals):
        self.singular_values = np.asarray(singular_values)
        self.vectors = [np.asarray(v) for v in vectors]
        self.residuals = list(residuals)


_EQ_NAMES = tuple(f"p{i}" for i in range(1, 10))


def _column(sys, slot, field, points):
    """Values of the nine determining equations at the points when the
    ansatz is a single basis field in one slot."""
    kwargs = {s: (field if s == slot else 0.0) for s in SLOTS}
    eqs = det3_printed(sys, **kwargs)
    col = np.empty(len(points) * len(_EQ_NAMES), dtype=np.complex128)
    k = 0
    for pt in points:
        for name in _EQ_NAMES:
            col[k] = eqs[name].value(pt)
            k += 1
    return col


def collocation_matrix(sys, basis, points, order=3):
    allowed = SLOTS_BY_ORDER[order]
    cols = []
    for slot in SLOTS:
        fields = basis.fields[slot]
        if fields and slot not in allowed:
            raise ValueError(
                f"slot {slot} not allowed for symmetry order {order}")
        for b in fields:
            cols.append(_column(sys, slot, b, points))
    return np.column_stack(cols)


def _trivial_vectors(basis, points, order, misfit_tol=1e-8):
    """Coefficient vectors of the known trivial symmetries: a constant in
    any G slot yields an operator polynomial in H and L."""
    out = []
    labels = basis.labels()
    for slot in ("G0", "GH", "GL"):
        fields = basis.fields[slot]
        if not fields or slot not in SLOTS_BY_ORDER[order]:
            continue
        M = np.array([[b.value(pt) for b in fields] for pt in points])
        ones = np.ones(len(points), dtype=np.complex128)
        c, _, _, _ = np.linalg.lstsq(M, ones, rcond=None)
        if np.max(np.abs(M @ c - ones)) > misfit_tol:
            continue  # the constant is not representable in this slot
        v = np.zeros(basis.size, dtype=np.complex128)
        for i, (s, j) in enumerate(labels):
            if s == slot:
                v[i] = c[j]
        out.append(v / np.linalg.norm(v))
    return out


def _orthonormalize(vectors, drop_tol=0.3):
    kept = []
    for v in vectors:
        w = v.copy()
        for u in kept:
            w = w - u * (np.conj(u) @ w)
        n = np.linalg.norm(w)
        if n > drop_tol:
            kept.append(w / n)
    return kept


def find_symmetry(sys, order, basis, points=None, tol=1e-8,
                  verify_order=10, seed=3):
    """Nullspace search for symmetries of the given expanded operator
    order.  Returns a list of (SymmetryAnsatz, ResidualReport), each
    re-verified by assembling the operator and certifying commutation.
    Candidates that are polynomials in H and L (constants in the G slots)
    are deflated away."""
    size = basis.size
    if size == 0:
        raise ValueError("empty basis")
    if points is None:
        n = max(8, int(np.ceil(2.2 * size / len(_EQ_NAMES))) + 4)
        points = sys.sample_points(n, seed=seed)
    if len(points) * len(_EQ_NAMES) < 2 * size:
        raise ValueError("need at least 2x more collocation rows than "
                         "unknown coefficients")
    basis.check_independence(points)

    M = collocation_matrix(sys, basis, points, order=order)
    norms = np.linalg.norm(M, axis=0)
    # a (near-)zero column is an exact symmetry by itself; normalizing it by
    # its own tiny norm would amplify roundoff into a dense noise column
    top = norms.max() if norms.size and norms.max() > 0 else 1.0
    scale = np.where(norms > 1e-12 * top, norms, top)
    U, sv, Vh = np.linalg.svd(M / scale)
    sigma_max = sv[0] if len(sv) else 0.0
    null = []
    for i in range(size):
        sigma = sv[i] if i < len(sv) else 0.0
        if sigma_max == 0.0 or sigma < tol * sigma_max:
            v = np.conj(Vh[i]) / scale
            null.append(v / np.linalg.norm(v))
    result = NullspaceResult(sv, null,
                             [float(np.linalg.norm(M @ v)) for v in null])
    if not null:
        raise NoCandidate("no nullspace vector below tolerance")

    trivial = _orthonormalize(_trivial_vectors(basis, points, order),
                              drop_tol=1e-8)
    genuine = []
    for v in null:
        w = v.copy()
        for t in trivial:
            w = w - t * (np.conj(t) @ w)
        if np.linalg.norm(w) > 0.3:
            genuine.append(w / np.linalg.norm(w))
    genuine = _orthonormalize(genuine)

    out = []
    for v in genuine:
        ansatz = SymmetryAnsatz(basis, v)
        try:
            _, rep = ansatz.verify(sys, points=list(points)[:4],
                                   order=verify_order, tol=10 * tol)
        except Exception:
            continue
        if rep.max_rel <= 10 * tol:
            out.append((ansatz, rep))
    if not out:
        raise NoCandidate("all nullspace candidates were trivial or "
                          "failed verification")
    return out


# ---------------------------------------------------------------------------
# algebra-relation fitting
# ---------------------------------------------------------------------------

class AlgebraRelation:
    """lhs = sum_w coeff_w * (operator word w), with fitted and fixed
    structure constants and a certification report."""

    def __init__(self, lhs, coeffs, provenance, report, cond):
        self.lhs = lhs
        self.coeffs = dict(coeffs)
        self.provenance = dict(provenance)
        self.report = report
        self.cond = cond

    def to_json(self):
        import json
        return json.dumps({
            "lhs": self.lhs,
            "terms": [{"word": w,
                       "coeff": [c.real, c.imag],
                       "provenance": self.provenance[w]}
                      for w, c in sorted(self.coeffs.items())],
            "max_rel": self.report.max_rel,
        })


def _token_jet(ops, token, at, order, cache):
    key = (token, tuple(at), order)
    if key in cache:
        return cache[key]
    if token == "1":
        nv = 2
        out = OpJet(nv, tuple(at), order,
                    {(0,) * nv: Jet.constant(1.0, nv, tuple(at), order)})
    elif token.startswith("{") and token.endswith("}"):
        x, y = token[1:-1].split(",")
        xj = _token_jet(ops, x.strip(), at, order, cache)
        yj = _token_jet(ops, y.strip(), at, order, cache)
        out = xj.compose(yj) + yj.compose(xj)
    else:
        op = ops[token]
        if isinstance(op, DiffOp):
            out = op.jet(at, order)
        else:
            out = op(at, order)
    cache[key] = out
    return out


def _split_word(word):
    """Tokens of a template word; anticommutator braces bind tighter than
    juxtaposition ('{A,B} H' is two tokens)."""
    tokens = []
    i = 0
    for part in word.split():
        tokens.append(part)
    return tokens or ["1"]


def word_factory(ops, word):
    """(at, order) -> OpJet for a product word over named operators; ops
    values are DiffOps or jet factories."""

    def make(at, order):
        cache = {}
        tokens = _split_word(word)
        out = _token_jet(ops, tokens[0], at, order, cache)
        for tok in tokens[1:]:
            out = out.compose(_token_jet(ops, tok, at, order, cache))
        return out

    return make


def commutator_factory(ops, x, y):
    def make(at, order):
        cache = {}
        xj = _token_jet(ops, x, at, order, cache)
        yj = _token_jet(ops, y, at, order, cache)
        return xj.commutator(yj)

    return make


def _flatten_opjet(opjet, alphas, order):
    rows = []
    for alpha in alphas:
        if alpha in opjet.terms:
            rows.append(np.asarray(opjet.terms[alpha].truncated(order).coeffs,
                                   dtype=np.complex128).ravel())
        else:
            shape = Jet.constant(0.0, opjet.nvars, opjet.base, order).coeffs
            rows.append(np.asarray(shape, dtype=np.complex128).ravel())
    return np.concatenate(rows)


def fit_relation(ops, lhs, template, points, fixed=None, order=18,
                 out_order=2, rcond=1e-10):
    """Least-squares structure constants: lhs = sum_w c_w * w.

    `ops` maps names to DiffOps or jet factories; `lhs` and template words
    are products of names ('A C'), '{X,Y}' anticommutators, or '1'.
    `fixed` pins chosen words' coefficients.  Raises RankDeficientFit when
    the template words are numerically dependent."""
    fixed = dict(fixed or {})
    lhs_f = lhs if callable(lhs) else word_factory(ops, lhs)
    lhs_label = lhs if isinstance(lhs, str) else "lhs"
    term_f = {w: word_factory(ops, w) for w in template}

    blocks = []
    per_point = []
    for at in points:
        jets = {w: f(at, order) for w, f in term_f.items()}
        jets[lhs_label] = lhs_f(at, order)
        common = min(j.order for j in jets.values())
        if common < out_order:
            raise ValueError("jet order exhausted; raise `order`")
        common = out_order
        alphas = sorted({a for j in jets.values() for a in j.terms})
        per_point.append((at, jets, alphas, common))

    unknowns = [w for w in template if w not in fixed]
    cols_all, rhs_all = [], []
    for at, jets, alphas, common in per_point:
        rhs = _flatten_opjet(jets[lhs_label], alphas, common)
        for w, c in fixed.items():
            rhs = rhs - c * _flatten_opjet(jets[w], alphas, common)
        cols = [_flatten_opjet(jets[w], alphas, common) for w in unknowns]
        cols_all.append(np.column_stack(cols) if cols else
                        np.zeros((len(rhs), 0)))
        rhs_all.append(rhs)
    M = np.vstack(cols_all)
    r = np.concatenate(rhs_all)

    cond = None
    coeffs = dict(fixed)
    if unknowns:
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] < rcond * sv[0]:
            raise RankDeficientFit("template words numerically dependent")
        cond = float(sv[0] / sv[-1])
        sol, _, _, _ = np.linalg.lstsq(M, r, rcond=rcond)
        coeffs.update({w: complex(c) for w, c in zip(unknowns, sol)})

    rep = ResidualReport()
    scale = 1.0
    for at, jets, alphas, common in per_point:
        total = -_flatten_opjet(jets[lhs_label], alphas, common)
        scale = max(scale, float(np.max(np.abs(total))))
        for w in template:
            vec = _flatten_opjet(jets[w], alphas, common)
            total = total + coeffs[w] * vec
            scale = max(scale, abs(coeffs[w]) * float(np.max(np.abs(vec))))
        rep.add(at, "relation", float(np.linalg.norm(total, ord=np.inf)))
    rep.scale = scale
    provenance = {w: ("fixed" if w in fixed else "fitted") for w in template}
    return AlgebraRelation(lhs_label, coeffs, provenance, rep, cond)
