"""Courant algebroids on TM + T*M (and TM + T*M + g + g*), Dirac structures.

Kinds of structure
------------------
``standard``       anchor X, bracket [X,Y] + L_X b - i_Y da + H(X,Y,.)
``contravariant``  anchor pi#(a), bracket with vector part
                   L^pi_a Y - i_b d_pi X + R(a,b,.) and form part the Koszul
                   bracket [a,b]_pi; d_pi = [pi, .] (Schouten)
``quasi_poisson``  anchor X; the standard bracket on TM + T*M plus the Lie
                   bracket of the double g + g*, coupled through the trivial
                   flat connection on the g + g* summand:
                   s-part  X(t) - Y(s) + [s, t]_double,
                   form    + <d s, t>
                   (s, t the g + g* parts of the two arguments).

The pairing is <X+a+u+k, Y+b+v+l> = a(Y) + b(X) + k(v) + l(u), without 1/2.
Membership in a maximally isotropic L is tested by pairing against a frame.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .checks import CheckResult, make_check
from .expr import add, as_expr, const, diff, esum, mul, neg, sub, var
from .fields import Chart, TensorField, de_rham, schouten, vector_bracket
from .tape import Tape


@dataclass
class GeneralizedSection:
    vec: list
    form: list
    lie: list | None = None
    dual: list | None = None

    def __post_init__(self):
        self.vec = [as_expr(v) for v in self.vec]
        self.form = [as_expr(v) for v in self.form]
        if self.lie is not None or self.dual is not None:
            n = len(self.lie if self.lie is not None else self.dual)
            self.lie = [as_expr(v) for v in (self.lie if self.lie is not None else [0] * n)]
            self.dual = [as_expr(v) for v in (self.dual if self.dual is not None else [0] * n)]
            if len(self.lie) != len(self.dual):
                raise ValueError("Lie-algebra and dual parts must have equal length")

    @property
    def extended(self):
        return self.lie is not None

    def parts(self):
        out = self.vec + self.form
        if self.extended:
            out += self.lie + self.dual
        return out

    def map(self, f):
        return GeneralizedSection([f(v) for v in self.vec], [f(v) for v in self.form],
                                  None if self.lie is None else [f(v) for v in self.lie],
                                  None if self.dual is None else [f(v) for v in self.dual])

    def scale(self, c):
        c = as_expr(c)
        return self.map(lambda v: mul(c, v))

    def __add__(self, other):
        return _zip(self, other, add)

    def __sub__(self, other):
        return _zip(self, other, sub)

    def __neg__(self):
        return self.map(neg)


def _zip(s, t, f):
    if s.extended != t.extended:
        raise ValueError("kind/part mismatch between sections")
    return GeneralizedSection([f(a, b) for a, b in zip(s.vec, t.vec)],
                              [f(a, b) for a, b in zip(s.form, t.form)],
                              None if s.lie is None else [f(a, b) for a, b in zip(s.lie, t.lie)],
                              None if s.dual is None else [f(a, b) for a, b in zip(s.dual, t.dual)])


@dataclass
class CourantStructure:
    kind: str
    chart: Chart
    H: TensorField | None = None
    pi: TensorField | None = None
    R: TensorField | None = None
    lie_c: list | None = None      # lie_c[a][b][c] = C~^a_bc
    phi: dict | None = None        # phi[(a,b,c)] = phi^{abc}, totally antisymmetric
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("standard", "contravariant", "quasi_poisson"):
            raise ValueError(f"unknown Courant kind {self.kind!r}")
        if self.kind == "contravariant" and self.pi is None:
            raise ValueError("contravariant Courant algebroid needs a bivector")
        if self.kind == "quasi_poisson":
            if self.lie_c is None:
                self.lie_c = [[[0.0] * self.n for _ in range(self.n)] for _ in range(self.n)]
            self.phi = dict(self.phi or {})

    def phi_at(self, a, b, c) -> float:
        from .oddpoly import sort_sign
        sign, key = sort_sign((a, b, c))
        if not sign:
            return 0.0
        return sign * float(self.phi.get(key, 0.0))

    @property
    def names(self):
        return self.chart.coord_names


def standard(chart, H=None):
    return CourantStructure("standard", chart, H=H)


def contravariant(chart, pi, R=None):
    return CourantStructure("contravariant", chart, pi=pi, R=R)


def quasi_poisson(chart, n, lie_c=None, phi=None, H=None):
    return CourantStructure("quasi_poisson", chart, H=H, lie_c=lie_c, phi=phi, n=n)


def section(chart, vec=None, form=None, lie=None, dual=None):
    d = chart.dim
    return GeneralizedSection(vec if vec is not None else [0] * d,
                              form if form is not None else [0] * d, lie, dual)


# --- pieces -----------------------------------------------------------------

def _grad(f, names):
    return [diff(f, n) for n in names]


def _lie_form(X, beta, names):
    d = len(names)
    return [esum([mul(X[k], diff(beta[j], names[k])) for k in range(d)]
                 + [mul(beta[k], diff(X[k], names[j])) for k in range(d)]) for j in range(d)]


def _ixd(Y, alpha, names):
    """(i_Y d alpha)_j = Y^i (d_i alpha_j - d_j alpha_i)."""
    d = len(names)
    return [esum(mul(Y[i], sub(diff(alpha[j], names[i]), diff(alpha[i], names[j])))
                 for i in range(d)) for j in range(d)]


def _pairing_expr(u, v):
    return esum(mul(a, b) for a, b in zip(u, v))


def sharp_list(pi: TensorField, alpha):
    d = pi.chart.dim
    return [esum(mul(alpha[i], pi[i, j]) for i in range(d)) for j in range(d)]


def koszul(pi: TensorField, alpha, beta):
    """[a, b]_pi = L_{pi# a} b - L_{pi# b} a - d(pi(a, b))."""
    names = pi.chart.coord_names
    pa, pb = sharp_list(pi, alpha), sharp_list(pi, beta)
    pab = _pairing_expr(beta, pa)  # pi(a, b) = a_i b_j pi^{ij}
    t1, t2, t3 = _lie_form(pa, beta, names), _lie_form(pb, alpha, names), _grad(pab, names)
    return [esum((a, neg(b), neg(c))) for a, b, c in zip(t1, t2, t3)]


def d_pi_function(pi, f):
    """d_pi f = [pi, f]_S = -pi#(df)."""
    names = pi.chart.coord_names
    return [neg(v) for v in sharp_list(pi, _grad(f, names))]


def d_pi_vector(pi, X) -> TensorField:
    """d_pi X = [pi, X]_S as a bivector."""
    ch = pi.chart
    Xf = TensorField(ch, 1, 0, {(i,): X[i] for i in range(ch.dim)})
    return schouten(pi, Xf)


def _contract_first(alpha, P: TensorField):
    """(i_alpha P)^j = alpha_i P^{ij}."""
    d = P.chart.dim
    return [esum(mul(alpha[i], P[i, j]) for i in range(d)) for j in range(d)]


# --- operations -------------------------------------------------------------

def pairing(cs: CourantStructure, s1: GeneralizedSection, s2: GeneralizedSection, point=None):
    terms = [_pairing_expr(s1.form, s2.vec), _pairing_expr(s2.form, s1.vec)]
    if s1.extended or s2.extended:
        if not (s1.extended and s2.extended):
            raise ValueError("kind/part mismatch between sections")
        terms += [_pairing_expr(s1.lie, s2.dual), _pairing_expr(s2.lie, s1.dual)]
    e = esum(terms)
    return e if point is None else _eval1(e, cs, point)


def anchor(cs: CourantStructure, s: GeneralizedSection) -> list:
    if cs.kind == "contravariant":
        return sharp_list(cs.pi, s.form)
    return list(s.vec)


def D_operator(cs: CourantStructure, f) -> GeneralizedSection:
    """The section Df with <Df, e> = rho(e) f."""
    f = as_expr(f)
    ch = cs.chart
    g = _grad(f, ch.coord_names)
    if cs.kind == "contravariant":
        # <V, b> = b_i pi^{ij} d_j f  =>  V^i = pi^{ij} d_j f
        d = ch.dim
        V = [esum(mul(cs.pi[i, j], g[j]) for j in range(d)) for i in range(d)]
        return section(ch, vec=V)
    if cs.kind == "quasi_poisson":
        return section(ch, form=g, lie=[0] * cs.n, dual=[0] * cs.n)
    return section(ch, form=g)


def dorfman(cs: CourantStructure, s1: GeneralizedSection, s2: GeneralizedSection, point=None):
    """Dorfman bracket [[s1, s2]] as a symbolic section (or its value at ``point``)."""
    ch = cs.chart
    names = ch.coord_names
    d = ch.dim
    X, a, Y, b = s1.vec, s1.form, s2.vec, s2.form
    if cs.kind in ("standard", "quasi_poisson"):
        if (cs.kind == "quasi_poisson") != (s1.extended and s2.extended):
            raise ValueError("kind/part mismatch")
        vec = vector_bracket(X, Y, ch)
        t1, t2 = _lie_form(X, b, names), _ixd(Y, a, names)
        form = [sub(p, q) for p, q in zip(t1, t2)]
        if cs.H is not None:
            form = [add(form[k], esum(mul(mul(X[i], Y[j]), cs.H[i, j, k])
                                      for i in range(d) for j in range(d)))
                    for k in range(d)]
        out = GeneralizedSection(vec, form)
        if cs.kind == "quasi_poisson":
            out = _double_part(cs, s1, s2, out)
        return out if point is None else _eval_section(out, cs, point)
    if cs.kind == "contravariant":
        if s1.extended or s2.extended:
            raise ValueError("kind/part mismatch")
        pi = cs.pi
        form = koszul(pi, a, b)
        dY = d_pi_vector(pi, Y)
        dX = d_pi_vector(pi, X)
        t1 = _contract_first(a, dY)
        t2 = d_pi_function(pi, _pairing_expr(a, Y))
        t3 = _contract_first(b, dX)
        vec = [esum((p, q, neg(r))) for p, q, r in zip(t1, t2, t3)]
        if cs.R is not None:
            vec = [add(vec[k], esum(mul(mul(a[i], b[j]), cs.R[i, j, k])
                                    for i in range(d) for j in range(d)))
                   for k in range(d)]
        out = GeneralizedSection(vec, form)
        return out if point is None else _eval_section(out, cs, point)
    raise ValueError(cs.kind)


def _double_part(cs, s1, s2, out):
    names = cs.names
    n = cs.n
    u, k, v, l = s1.lie, s1.dual, s2.lie, s2.dual
    X, Y = s1.vec, s2.vec
    Cc = cs.lie_c

    def deriv(V, f):
        return esum(mul(V[i], diff(f, nm)) for i, nm in enumerate(names))

    lie, dual = [], []
    for p in range(n):
        terms = [deriv(X, v[p]), neg(deriv(Y, u[p]))]
        terms += [mul(const(Cc[p][q][r]), mul(u[q], v[r]))
                  for q in range(n) for r in range(n) if Cc[p][q][r]]
        terms += [mul(const(cs.phi_at(p, q, r)), mul(k[q], l[r]))
                  for q in range(n) for r in range(n) if cs.phi_at(p, q, r)]
        lie.append(esum(terms))
        terms = [deriv(X, l[p]), neg(deriv(Y, k[p]))]
        terms += [mul(const(Cc[r][p][q]), sub(mul(u[q], l[r]), mul(v[q], k[r])))
                  for q in range(n) for r in range(n) if Cc[r][p][q]]
        dual.append(esum(terms))
    form = [esum([out.form[j]]
                 + [mul(diff(u[p], nm), l[p]) for p in range(n)]
                 + [mul(diff(k[p], nm), v[p]) for p in range(n)])
            for j, nm in enumerate(names)]
    return GeneralizedSection(out.vec, form, lie, dual)


def _eval1(e, cs, point):
    return float(Tape([e], cs.names).eval([list(point)])[0, 0])


def _eval_section(s, cs, point):
    """Numeric value of a section at a point (plain float lists, not expressions)."""
    vals = [float(v) for v in Tape(s.parts(), cs.names).eval([list(point)])[0]]
    d = cs.chart.dim
    out = object.__new__(GeneralizedSection)
    out.vec, out.form = vals[:d], vals[d:2 * d]
    out.lie = out.dual = None
    if s.extended:
        n = len(s.lie)
        out.lie, out.dual = vals[2 * d:2 * d + n], vals[2 * d + n:]
    return out


# --- axioms -----------------------------------------------------------------

def random_sections(cs: CourantStructure, count=3, seed=0, degree=2, scale=1.0):
    """Seeded random polynomial sections (coefficients standard normal)."""
    rng = np.random.default_rng(seed)
    ch = cs.chart
    xs = [var(nm) for nm in ch.coord_names]
    monos = [as_expr(1.0)] + xs
    if degree >= 2:
        monos += [mul(xs[i], xs[j]) for i in range(ch.dim) for j in range(i, ch.dim)]

    def poly():
        return esum(mul(const(scale * rng.standard_normal()), m) for m in monos)

    out = []
    for _ in range(count):
        d = ch.dim
        if cs.kind == "quasi_poisson":
            out.append(GeneralizedSection([poly() for _ in range(d)], [poly() for _ in range(d)],
                                          [poly() for _ in range(cs.n)],
                                          [poly() for _ in range(cs.n)]))
        else:
            out.append(GeneralizedSection([poly() for _ in range(d)], [poly() for _ in range(d)]))
    return out


def check_courant_axioms(cs: CourantStructure, sections, points, tol=1e-9, test_function=None):
    names = cs.names
    f = as_expr(test_function) if test_function is not None else \
        add(mul(var(names[0]), var(names[-1])), const(1.0))
    br = {}

    def B(i, j):
        if (i, j) not in br:
            br[i, j] = dorfman(cs, sections[i], sections[j])
        return br[i, j]

    idx = range(len(sections))
    jac, anch, leib, sym, inv = [], [], [], [], []
    for i, j, k in itertools.product(idx, repeat=3):
        lhs = dorfman(cs, sections[i], B(j, k))
        rhs = dorfman(cs, B(i, j), sections[k]) + dorfman(cs, sections[j], B(i, k))
        jac += (lhs - rhs).parts()
        rho1 = anchor(cs, sections[i])
        p23 = pairing(cs, sections[j], sections[k])
        lhs5 = esum(mul(rho1[m], diff(p23, nm)) for m, nm in enumerate(names))
        inv.append(sub(lhs5, add(pairing(cs, B(i, j), sections[k]),
                                 pairing(cs, sections[j], B(i, k)))))
    for i, j in itertools.product(idx, repeat=2):
        a = anchor(cs, B(i, j))
        b = vector_bracket(anchor(cs, sections[i]), anchor(cs, sections[j]), cs.chart)
        anch += [sub(p, q) for p, q in zip(a, b)]
        fe = sections[j].scale(f)
        rf = esum(mul(anchor(cs, sections[i])[m], diff(f, nm)) for m, nm in enumerate(names))
        leib += (dorfman(cs, sections[i], fe) - B(i, j).scale(f) - sections[j].scale(rf)).parts()
        Dp = D_operator(cs, pairing(cs, sections[i], sections[j]))
        sym += (B(i, j) + B(j, i) - Dp).parts()
    specs = [("courant.axiom1_jacobi", "Courant axiom: Jacobi", jac),
             ("courant.axiom2_anchor", "Courant axiom: anchor morphism", anch),
             ("courant.axiom3_leibniz", "Courant axiom: Leibniz", leib),
             ("courant.axiom4_symmetric", "Courant axiom: symmetric part", sym),
             ("courant.axiom5_invariance", "Courant axiom: invariance of pairing", inv)]
    return [make_check(cid, anc, ex, names, points, tol) for cid, anc, ex in specs]


# --- Dirac structures -----------------------------------------------------------

@dataclass
class DiracFrame:
    sections: list
    expected_rank: int
    label: str = ""


def graph_presymplectic(omega: TensorField) -> DiracFrame:
    """Frame {d_i + omega_flat(d_i)} with omega_flat(X)_j = X^i omega_ij."""
    ch = omega.chart
    d = ch.dim
    secs = [section(ch, vec=[1.0 if k == i else 0.0 for k in range(d)],
                    form=[omega[i, j] for j in range(d)]) for i in range(d)]
    return DiracFrame(secs, d, "graph of a 2-form")


def graph_poisson(pi: TensorField) -> DiracFrame:
    """Frame {pi#(dx^i) + dx^i} with pi#(a)^j = a_i pi^{ij}."""
    ch = pi.chart
    d = ch.dim
    secs = [section(ch, vec=[pi[i, j] for j in range(d)],
                    form=[1.0 if k == i else 0.0 for k in range(d)]) for i in range(d)]
    return DiracFrame(secs, d, "graph of a bivector")


def graph_quasi_poisson(pi: TensorField, rho_g) -> DiracFrame:
    """Frame {pi#(dx^i) + dx^i - <rho_g, dx^i>} and {rho_g(s_a) + s_a}.

    The g* component carries a minus sign; with it the subbundle is isotropic
    for the pairing a(Y) + b(X) + k(v) + l(u).
    """
    ch = pi.chart
    d = ch.dim
    n = len(rho_g)
    rg = [[as_expr(v) for v in row] for row in rho_g]
    secs = []
    for i in range(d):
        secs.append(GeneralizedSection([pi[i, j] for j in range(d)],
                                       [1.0 if k == i else 0.0 for k in range(d)],
                                       [0.0] * n, [neg(rg[a][i]) for a in range(n)]))
    for a in range(n):
        secs.append(GeneralizedSection(list(rg[a]), [0.0] * d,
                                       [1.0 if b == a else 0.0 for b in range(n)], [0.0] * n))
    return DiracFrame(secs, d + n, "quasi-Poisson graph")


def frame_matrix(cs, frame: DiracFrame, points) -> np.ndarray:
    """Numeric frame, shape (npoints, nsections, fibre dim)."""
    exprs = [e for s in frame.sections for e in s.parts()]
    vals = Tape(exprs, cs.names).eval(points)
    m = len(frame.sections)
    return vals.reshape(len(points), m, -1)


def frame_rank(cs, frame, points, rel=1e-8):
    M = frame_matrix(cs, frame, points)
    ranks = []
    for k in range(M.shape[0]):
        s = np.linalg.svd(M[k], compute_uv=False)
        ranks.append(int(np.sum(s > rel * s[0])) if s.size and s[0] > 0 else 0)
    return ranks


def membership_residuals(cs, w: GeneralizedSection, frame: DiracFrame) -> list:
    """<w, s> for every frame element; all vanish iff w lies in a maximal isotropic L."""
    return [pairing(cs, w, s) for s in frame.sections]


def check_dirac(cs: CourantStructure, frame: DiracFrame, points, tol=1e-9, prefix="dirac"):
    names = cs.names
    secs = frame.sections
    pairs = list(itertools.combinations_with_replacement(range(len(secs)), 2))
    iso = [pairing(cs, secs[i], secs[j]) for i, j in pairs]
    r_iso = make_check(f"{prefix}.isotropy", "Dirac structure: isotropy", iso, names, points, tol)
    ranks = frame_rank(cs, frame, points)
    bad = [k for k, rk in enumerate(ranks) if rk != frame.expected_rank]
    r_rank = CheckResult(f"{prefix}.rank", "maximal isotropy", not bad,
                         float(len(bad)), [float(v) for v in points[bad[0]]] if bad else None,
                         0.5, len(points),
                         details={"expected": frame.expected_rank, "min_rank": min(ranks),
                                  "max_rank": max(ranks)})
    clos = []
    for i, j in itertools.product(range(len(secs)), repeat=2):
        clos += membership_residuals(cs, dorfman(cs, secs[i], secs[j]), frame)
    r_clos = make_check(f"{prefix}.closure", "Dirac structure: involutivity", clos, names, points, tol)
    return [r_iso, r_rank, r_clos]


# --- epsilon graphs -----------------------------------------------------------

def epsilon_graph(split, eps: TensorField, points, tol=1e-9, H=None, pi=None):
    """Maurer-Cartan residual d_L eps + 1/2 [eps, eps] for a standard splitting.

    ``split='tangent'``: L = TM, eps a 2-form; residual d eps + H.
    ``split='poisson'``: L = T*M with the Koszul bracket of ``pi``, eps a
    bivector; residual [pi, eps]_S + 1/2 [eps, eps]_S.
    The verdict is cross-checked with :func:`check_dirac` on the graph frame.
    """
    ch = eps.chart
    names = ch.coord_names
    if split == "tangent":
        if eps.up or eps.down != 2:
            raise ValueError("tangent splitting needs a 2-form")
        res_t = de_rham(eps)
        if H is not None:
            res_t = res_t + H
        res = make_check("dirac.epsilon_graph", "Maurer-Cartan equation of a graph deformation", list(res_t.comps.values()),
                         names, points, tol)
        frame = graph_presymplectic(eps)
        cross = check_dirac(standard(ch, H), frame, points, tol, prefix="dirac.epsilon_cross")
    elif split == "poisson":
        if pi is None or eps.down or eps.up != 2:
            raise ValueError("poisson splitting needs pi and a bivector eps")
        res_t = schouten(pi, eps) + schouten(eps, eps).scale(0.5)
        res = make_check("dirac.epsilon_graph", "Maurer-Cartan equation of a graph deformation", list(res_t.comps.values()),
                         names, points, tol)
        frame = graph_poisson(pi + eps)
        cross = check_dirac(standard(ch), frame, points, tol, prefix="dirac.epsilon_cross")
    else:
        raise ValueError(f"unsupported splitting {split!r}")
    agree = res.passed == all(c.passed for c in cross)
    res.details["cross_check_agrees"] = agree
    res.details["cross_check_residual"] = max(c.max_residual for c in cross if c.check_id.endswith("closure"))
    return res
