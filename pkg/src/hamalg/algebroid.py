"""Lie algebroids over a chart, connections, and their curvature tensors.

Conventions
-----------
* Basis sections e_a, anchor rho(e_a) = rho[a][i] d_i, bracket
  [e_a, e_b] = C[c][a][b] e_c.
* A vector bundle connection acts by nabla_i e_a = omega[b][a][i] e_b, so for a
  section s: (nabla_v s)^c = v^i (d_i s^c + omega^c_{ai} s^a), and on the dual
  (nabla mu)_{ai} = d_i mu_a - omega^b_{ai} mu_b.
* The A-connection on tangent tensors is the opposite connection
  A-nabla_e v = [rho(e), v] + rho(nabla_v e).  It is extended to 1-forms by
  duality and to all tensors as a derivation:
  A-nabla_e T = L_{rho(e)} T + K(e).T with K(e)^j_i = rho^j_b (nabla_i e)^b,
  acting as +K on upper and -K^T on lower indices.
* The A-connection on A used for the torsion and the A-curvature is
  A-nabla_e e' = nabla_{rho(e)} e'.

Tensors are returned as nested lists of expressions:
  R[c][a][i][j] = R^c_{ij a},   T[c][a][b] = T^c_{ab},
  AR[d][c][a][b] = (A-R(e_a, e_b) e_c)^d,   S[c][i][a][b] = S^c_{i ab}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .checks import make_check
from .expr import ZERO, Expr, as_expr, diff, esum, mul, neg, sub
from .fields import Chart, TensorField, lie_derivative, vector_bracket
from .oddpoly import sort_sign


class LieAlgebroidData:
    """Anchor ``rho[a][i]`` and antisymmetric structure functions ``C[c][a][b]``."""

    def __init__(self, chart: Chart, rank: int, rho, c=None):
        self.chart = chart
        self.rank = r = int(rank)
        d = chart.dim
        if r < 1:
            raise ValueError("algebroid rank must be at least 1")
        rho = [[as_expr(v) for v in row] for row in rho]
        if len(rho) != r or any(len(row) != d for row in rho):
            raise ValueError(f"anchor must be {r} x {d}")
        self.rho = rho
        # canonical storage: only a < b kept, lookups are signed
        self._c = {}
        if c is not None:
            if isinstance(c, dict):
                items = c.items()
            else:
                items = (((cc, a, b), c[cc][a][b]) for cc in range(r) for a in range(r)
                         for b in range(r))
            for (cc, a, b), v in items:
                v = as_expr(v)
                if a == b:
                    if not v.is_zero:
                        raise ValueError("structure functions must be antisymmetric")
                    continue
                if a > b:
                    # only trust the canonical half when a full table is passed
                    if not isinstance(c, dict):
                        continue
                    a, b, v = b, a, neg(v)
                self._c[(cc, a, b)] = v

    def C(self, c, a, b) -> Expr:
        if a == b:
            return ZERO
        if a < b:
            return self._c.get((c, a, b), ZERO)
        return neg(self._c.get((c, b, a), ZERO))

    @property
    def names(self):
        return self.chart.coord_names

    def with_c(self, c_override) -> "LieAlgebroidData":
        out = LieAlgebroidData(self.chart, self.rank, self.rho)
        out._c = dict(self._c)
        for key, v in c_override.items():
            cc, a, b = key
            if a > b:
                a, b, v = b, a, neg(as_expr(v))
            out._c[(cc, a, b)] = as_expr(v)
        return out

    def anchor(self, s) -> list:
        d, r = self.chart.dim, self.rank
        return [esum(mul(as_expr(s[a]), self.rho[a][i]) for a in range(r)) for i in range(d)]

    def bracket(self, s, t) -> list:
        """[s, t]^c = s^a t^b C^c_ab + rho(s) t^c - rho(t) s^c."""
        r = self.rank
        names = self.names
        s = [as_expr(v) for v in s]
        t = [as_expr(v) for v in t]
        rs, rt = self.anchor(s), self.anchor(t)
        out = []
        for c in range(r):
            terms = [mul(mul(s[a], t[b]), self.C(c, a, b))
                     for a in range(r) for b in range(r) if a != b]
            terms += [mul(rs[i], diff(t[c], n)) for i, n in enumerate(names)]
            terms += [neg(mul(rt[i], diff(s[c], n))) for i, n in enumerate(names)]
            out.append(esum(terms))
        return out

    def basis(self, a) -> list:
        return [as_expr(1.0 if b == a else 0.0) for b in range(self.rank)]


@dataclass
class ConnectionData:
    """Connection coefficients ``omega[b][a][i]`` = omega^b_{ai}."""
    omega: list

    @classmethod
    def trivial(cls, rank, dim):
        return cls([[[ZERO] * dim for _ in range(rank)] for _ in range(rank)])

    def __post_init__(self):
        self.omega = [[[as_expr(v) for v in row] for row in blk] for blk in self.omega]

    def w(self, b, a, i) -> Expr:
        return self.omega[b][a][i]

    def is_trivial(self):
        return all(v.is_zero for blk in self.omega for row in blk for v in row)


# --- axioms -----------------------------------------------------------------

def morphism_residuals(A: LieAlgebroidData) -> list:
    """rho_a^j d_j rho_b^i - rho_b^j d_j rho_a^i - C^c_ab rho_c^i for a < b."""
    r, d = A.rank, A.chart.dim
    out = []
    for a, b in itertools.combinations(range(r), 2):
        br = vector_bracket(A.rho[a], A.rho[b], A.chart)
        for i in range(d):
            out.append(sub(br[i], esum(mul(A.C(c, a, b), A.rho[c][i]) for c in range(r))))
    return out


def jacobi_residuals(A: LieAlgebroidData) -> list:
    """Cyclic sum [[e_a,e_b],e_c] + cyclic on basis sections, a < b < c."""
    r = A.rank
    out = []
    for a, b, c in itertools.combinations(range(r), 3):
        ea, eb, ec = A.basis(a), A.basis(b), A.basis(c)
        t1 = A.bracket(A.bracket(ea, eb), ec)
        t2 = A.bracket(A.bracket(eb, ec), ea)
        t3 = A.bracket(A.bracket(ec, ea), eb)
        out += [esum((t1[k], t2[k], t3[k])) for k in range(r)]
    return out


def check_axioms(A: LieAlgebroidData, points, tol=1e-9):
    """Anchor morphism and Jacobi identity on basis sections."""
    names = A.names
    morph = make_check("algebroid.anchor_morphism", "anchor is a bracket morphism",
                       morphism_residuals(A), names, points, tol)
    jac = make_check("algebroid.jacobi", "Lie algebroid axioms", jacobi_residuals(A), names, points, tol)
    return [morph, jac]


# --- A-forms and the A-differential ---------------------------------------

class AForm:
    """Section of Lambda^m A* with expression components on sorted index tuples."""

    def __init__(self, rank, degree, comps=None):
        self.rank = rank
        self.degree = degree
        self.comps = {}
        for k, v in (comps or {}).items():
            sign, key = sort_sign(tuple(k))
            if sign:
                v = as_expr(v)
                self.comps[key] = v if sign > 0 else neg(v)

    def __getitem__(self, key) -> Expr:
        sign, k = sort_sign(tuple(key))
        if not sign:
            return ZERO
        v = self.comps.get(k, ZERO)
        return v if sign > 0 else neg(v)

    def on(self, sections) -> Expr:
        """Evaluate on m sections of A (each a list of r expressions)."""
        r = self.rank
        if len(sections) != self.degree:
            raise ValueError("wrong number of arguments")
        if self.degree == 0:
            return self.comps.get((), ZERO)
        terms = []
        for idx in itertools.product(range(r), repeat=self.degree):
            c = self[idx]
            if c.is_zero:
                continue
            t = c
            for s, a in zip(sections, idx):
                t = mul(t, as_expr(s[a]))
            terms.append(t)
        return esum(terms)


def a_differential(A: LieAlgebroidData, eta: AForm, args, point=None):
    """(A-d eta)(e_1, ..., e_{m+1}) by the alternating-sum formula.

    Degree overflow (m + 1 > rank) returns zero.
    """
    m = eta.degree
    if len(args) != m + 1:
        raise ValueError(f"A-differential of an {m}-form takes {m + 1} sections")
    if m + 1 > A.rank:
        res = ZERO
    else:
        terms = []
        for i in range(m + 1):
            rest = args[:i] + args[i + 1:]
            val = eta.on(rest)
            rho_i = A.anchor(args[i])
            t = esum(mul(rho_i[k], diff(val, n)) for k, n in enumerate(A.names))
            terms.append(t if i % 2 == 0 else neg(t))
        for i, j in itertools.combinations(range(m + 1), 2):
            rest = [s for k, s in enumerate(args) if k not in (i, j)]
            t = eta.on([A.bracket(args[i], args[j])] + rest)
            terms.append(t if (i + j) % 2 == 0 else neg(t))
        res = esum(terms)
    return res if point is None else _at(res, A, point)


def _at(e, A, point):
    from .tape import Tape
    return float(Tape([e], A.names).eval([list(point)])[0, 0])


# --- connections ------------------------------------------------------------

def cov_section(A, conn, v, s) -> list:
    """nabla_v s for a section s of A."""
    r, d = A.rank, A.chart.dim
    names = A.names
    v = [as_expr(c) for c in v]
    s = [as_expr(c) for c in s]
    return [esum(mul(v[i], esum([diff(s[c], names[i])]
                               + [mul(conn.w(c, a, i), s[a]) for a in range(r)]))
                 for i in range(d)) for c in range(r)]


def cov_dual(A, conn, mu) -> list:
    """(nabla mu)[a][i] = d_i mu_a - omega^b_{ai} mu_b."""
    r, d = A.rank, A.chart.dim
    mu = [as_expr(m) for m in mu]
    return [[sub(diff(mu[a], A.names[i]), esum(mul(conn.w(b, a, i), mu[b]) for b in range(r)))
             for i in range(d)] for a in range(r)]


def k_matrix(A, conn, e) -> list:
    """K[j][i] = rho^j_b (nabla_i e)^b, the endomorphism v -> rho(nabla_v e)."""
    r, d = A.rank, A.chart.dim
    e = [as_expr(c) for c in e]
    ne = [[esum([diff(e[b], A.names[i])] + [mul(conn.w(b, a, i), e[a]) for a in range(r)])
           for b in range(r)] for i in range(d)]
    return [[esum(mul(A.rho[b][j], ne[i][b]) for b in range(r)) for i in range(d)]
            for j in range(d)]


def a_connection_tm(A, conn, e, v, point=None):
    """A-nabla_e v = [rho(e), v] + rho(nabla_v e)."""
    d = A.chart.dim
    v = _as_list(v, d)
    br = vector_bracket(A.anchor(e), v, A.chart)
    K = k_matrix(A, conn, e)
    out = [esum([br[j]] + [mul(K[j][i], v[i]) for i in range(d)]) for j in range(d)]
    return out if point is None else _vec_at(out, A, point)


def a_connection_form(A, conn, e, alpha, point=None):
    """A-nabla_e alpha = L_{rho(e)} alpha - <rho(nabla e), alpha> (dual connection)."""
    d = A.chart.dim
    from .fields import one_form
    alpha = _as_list(alpha, d)
    L = lie_derivative(A.anchor(e), one_form(A.chart, alpha))
    K = k_matrix(A, conn, e)
    out = [sub(L[i], esum(mul(K[j][i], alpha[j]) for j in range(d))) for i in range(d)]
    return out if point is None else _vec_at(out, A, point)


def a_connection_tensor(A, conn, e, T: TensorField) -> TensorField:
    """A-nabla_e on an arbitrary tangent tensor field, as a derivation."""
    d = A.chart.dim
    K = k_matrix(A, conn, e)
    out = lie_derivative(A.anchor(e), T)
    extra = T.like({})
    for idx in (T.indices() if T.rank else []):
        terms = []
        for pos in range(T.up):
            j = idx[pos]
            terms += [mul(K[j][i], T[idx[:pos] + (i,) + idx[pos + 1:]]) for i in range(d)]
        for pos in range(T.up, T.rank):
            i = idx[pos]
            terms += [neg(mul(K[j][i], T[idx[:pos] + (j,) + idx[pos + 1:]])) for j in range(d)]
        extra._set(idx, esum(terms))
    return out + extra


class AValued:
    """Element of Gamma(Lambda^m A* (x) E) for a tangent tensor bundle E.

    ``comps`` maps sorted A-index tuples of length m to TensorFields of a
    common type.
    """

    def __init__(self, A, degree, comps, proto: TensorField):
        self.A = A
        self.degree = degree
        self.proto = proto
        self.comps = {}
        for k, T in comps.items():
            sign, key = sort_sign(tuple(k))
            if sign:
                self.comps[key] = T if sign > 0 else -T

    def get(self, idx) -> TensorField:
        sign, key = sort_sign(tuple(idx))
        if not sign or key not in self.comps:
            return self.proto.like({})
        T = self.comps[key]
        return T if sign > 0 else -T

    def on(self, sections) -> TensorField:
        r = self.A.rank
        if self.degree == 0:
            return self.comps.get((), self.proto.like({}))
        out = self.proto.like({})
        for idx in itertools.product(range(r), repeat=self.degree):
            key = tuple(sorted(idx))
            if len(set(idx)) < len(idx) or key not in self.comps:
                continue
            c = as_expr(1.0)
            for s, a in zip(sections, idx):
                c = mul(c, as_expr(s[a]))
            out = out + self.get(idx).scale(c)
        return out


def a_exterior_covariant_derivative(A, conn, alpha: AValued, args, point=None):
    """(A-nabla alpha)(e_1, ..., e_{m+1}) with A-nabla acting on the tensor legs."""
    m = alpha.degree
    if len(args) != m + 1:
        raise ValueError(f"need {m + 1} section arguments")
    if m + 1 > A.rank:
        out = alpha.proto.like({})
    else:
        out = alpha.proto.like({})
        for i in range(m + 1):
            rest = args[:i] + args[i + 1:]
            t = a_connection_tensor(A, conn, args[i], alpha.on(rest))
            out = out + (t if i % 2 == 0 else -t)
        for i, j in itertools.combinations(range(m + 1), 2):
            rest = [s for k, s in enumerate(args) if k not in (i, j)]
            t = alpha.on([A.bracket(args[i], args[j])] + rest)
            out = out + (t if (i + j) % 2 == 0 else -t)
    return out if point is None else out.at(point)


# --- curvature and torsion: coordinate expressions -------------------------

def curvature_R(A, conn) -> list:
    r, d = A.rank, A.chart.dim
    n = A.names
    w = conn.w
    R = [[[[ZERO] * d for _ in range(d)] for _ in range(r)] for _ in range(r)]
    for c in range(r):
        for a in range(r):
            for i, j in itertools.combinations(range(d), 2):
                v = esum([diff(w(c, a, j), n[i]), neg(diff(w(c, a, i), n[j]))]
                         + [sub(mul(w(b, a, j), w(c, b, i)), mul(w(b, a, i), w(c, b, j)))
                            for b in range(r)])
                R[c][a][i][j] = v
                R[c][a][j][i] = neg(v)
    return R


def a_torsion_T(A, conn) -> list:
    r, d = A.rank, A.chart.dim
    T = [[[ZERO] * r for _ in range(r)] for _ in range(r)]
    for c in range(r):
        for a, b in itertools.combinations(range(r), 2):
            v = esum([neg(A.C(c, a, b))]
                     + [sub(mul(A.rho[a][i], conn.w(c, b, i)), mul(A.rho[b][i], conn.w(c, a, i)))
                        for i in range(d)])
            T[c][a][b] = v
            T[c][b][a] = neg(v)
    return T


def nabla_T(A, conn, T=None) -> list:
    """(nabla_i T)^c_ab as nT[c][i][a][b]."""
    r, d = A.rank, A.chart.dim
    T = T or a_torsion_T(A, conn)
    w = conn.w
    out = [[[[ZERO] * r for _ in range(r)] for _ in range(d)] for _ in range(r)]
    for c in range(r):
        for i in range(d):
            for a, b in itertools.combinations(range(r), 2):
                v = esum([diff(T[c][a][b], A.names[i])]
                         + [mul(w(c, e, i), T[e][a][b]) for e in range(r)]
                         + [neg(mul(w(e, a, i), T[c][e][b])) for e in range(r)]
                         + [neg(mul(w(e, b, i), T[c][a][e])) for e in range(r)])
                out[c][i][a][b] = v
                out[c][i][b][a] = neg(v)
    return out


def basic_curvature_S(A, conn) -> list:
    """S^c_{iab} = nabla_i T^c_ab + rho_b^j R^c_{ija} - rho_a^j R^c_{ijb}.

    This is the right-hand side nabla T + 2 Alt i_rho R of the defining identity;
    :func:`basic_curvature_S_definition` evaluates the defining expression
    itself.
    """
    r, d = A.rank, A.chart.dim
    R = curvature_R(A, conn)
    nT = nabla_T(A, conn)
    S = [[[[ZERO] * r for _ in range(r)] for _ in range(d)] for _ in range(r)]
    for c in range(r):
        for i in range(d):
            for a, b in itertools.combinations(range(r), 2):
                v = esum([nT[c][i][a][b]]
                         + [sub(mul(A.rho[b][j], R[c][a][i][j]), mul(A.rho[a][j], R[c][b][i][j]))
                            for j in range(d)])
                S[c][i][a][b] = v
                S[c][i][b][a] = neg(v)
    return S


def a_curvature(A, conn) -> list:
    """Curvature of A-nabla_e e' = nabla_{rho(e)} e' in coordinates.

    AR(e_a, e_b) e_c = rho_a^i rho_b^j R(d_i, d_j) e_c
                       + nabla_{[rho_a, rho_b] - rho([e_a, e_b])} e_c.
    """
    r, d = A.rank, A.chart.dim
    R = curvature_R(A, conn)
    morph = {}
    for a, b in itertools.combinations(range(r), 2):
        br = vector_bracket(A.rho[a], A.rho[b], A.chart)
        morph[a, b] = [sub(br[i], esum(mul(A.C(e, a, b), A.rho[e][i]) for e in range(r)))
                       for i in range(d)]
    AR = [[[[ZERO] * r for _ in range(r)] for _ in range(r)] for _ in range(r)]
    for dd in range(r):
        for c in range(r):
            for a, b in itertools.combinations(range(r), 2):
                v = esum([mul(mul(A.rho[a][i], A.rho[b][j]), R[dd][c][i][j])
                          for i in range(d) for j in range(d)]
                         + [mul(morph[a, b][i], conn.w(dd, c, i)) for i in range(d)])
                AR[dd][c][a][b] = v
                AR[dd][c][b][a] = neg(v)
    return AR


# --- definition-level evaluation -------------------------------------------

def _e(A, a):
    return A.basis(a)


def _unit(d, i):
    return [as_expr(1.0 if k == i else 0.0) for k in range(d)]


def curvature_R_definition(A, conn, s, v, w) -> list:
    """R(v, w) s = nabla_v nabla_w s - nabla_w nabla_v s - nabla_[v,w] s."""
    t1 = cov_section(A, conn, v, cov_section(A, conn, w, s))
    t2 = cov_section(A, conn, w, cov_section(A, conn, v, s))
    t3 = cov_section(A, conn, vector_bracket(v, w, A.chart), s)
    return [esum((t1[c], neg(t2[c]), neg(t3[c]))) for c in range(A.rank)]


def _anab(A, conn, e, f):
    return cov_section(A, conn, A.anchor(e), f)


def a_torsion_definition(A, conn, e, f) -> list:
    """T(e, f) = A-nabla_e f - A-nabla_f e - [e, f]."""
    t1, t2, t3 = _anab(A, conn, e, f), _anab(A, conn, f, e), A.bracket(e, f)
    return [esum((t1[c], neg(t2[c]), neg(t3[c]))) for c in range(A.rank)]


def a_curvature_definition(A, conn, e, f, g) -> list:
    t1 = _anab(A, conn, e, _anab(A, conn, f, g))
    t2 = _anab(A, conn, f, _anab(A, conn, e, g))
    t3 = _anab(A, conn, A.bracket(e, f), g)
    return [esum((t1[c], neg(t2[c]), neg(t3[c]))) for c in range(A.rank)]


def basic_curvature_definition(A, conn, e, f, v) -> list:
    """S(e, f)(v) from the defining combination of Lie derivatives of nabla.

    (L_e nabla f)(v) = [e, nabla_v f] - nabla_{[rho(e), v]} f, so
    S(e,f)(v) = (L_e nabla f)(v) - (L_f nabla e)(v) - nabla_{rho(nabla_v e)} f
                + nabla_{rho(nabla_v f)} e - nabla_v [e, f].
    """
    r = A.rank
    ch = A.chart
    re, rf = A.anchor(e), A.anchor(f)
    nve, nvf = cov_section(A, conn, v, e), cov_section(A, conn, v, f)
    parts = [
        A.bracket(e, nvf),
        [neg(x) for x in cov_section(A, conn, vector_bracket(re, v, ch), f)],
        [neg(x) for x in A.bracket(f, nve)],
        cov_section(A, conn, vector_bracket(rf, v, ch), e),
        [neg(x) for x in cov_section(A, conn, A.anchor(nve), f)],
        cov_section(A, conn, A.anchor(nvf), e),
        [neg(x) for x in cov_section(A, conn, v, A.bracket(e, f))],
    ]
    return [esum(p[c] for p in parts) for c in range(r)]


def basic_curvature_S_definition(A, conn) -> list:
    """Full S[c][i][a][b] table from the definition on basis sections."""
    r, d = A.rank, A.chart.dim
    S = [[[[ZERO] * r for _ in range(r)] for _ in range(d)] for _ in range(r)]
    for i in range(d):
        v = _unit(d, i)
        for a, b in itertools.combinations(range(r), 2):
            val = basic_curvature_definition(A, conn, _e(A, a), _e(A, b), v)
            for c in range(r):
                S[c][i][a][b] = val[c]
                S[c][i][b][a] = neg(val[c])
    return S


def flatten(t) -> list:
    if isinstance(t, Expr):
        return [t]
    out = []
    for x in t:
        out += flatten(x)
    return out


def _as_list(v, d):
    if isinstance(v, TensorField):
        return [v[i] for i in range(d)]
    v = [as_expr(c) for c in v]
    if len(v) != d:
        raise ValueError("component count does not match chart")
    return v


def _vec_at(out, A, point):
    from .tape import Tape
    return Tape(out, A.names).eval([list(point)])[0]


def check_curvature_identity(A, conn, points, tol=1e-9):
    """Defining expression of S against nabla T + 2 Alt i_rho R."""
    lhs = flatten(basic_curvature_S_definition(A, conn))
    rhs = flatten(basic_curvature_S(A, conn))
    res = [sub(x, y) for x, y in zip(lhs, rhs)]
    return make_check("algebroid.basic_curvature_identity", "basic curvature identity", res, A.names,
                      points, tol)
