"""Degree-1 graded symplectic algebra on T*[1]A*.

Coordinates are x^i, y_a (degree 0) and z_i, a^a (degree 1).  Odd
generators are indexed z_1..z_d -> 0..d-1 and a^1..a^r -> d..d+r-1, so a
graded polynomial is an :class:`OddPoly` whose coefficients are expressions
in the x and y names.

The canonical bracket is {x^i, z_j} = delta, {y_a, a^b} = delta.  In
covariant mode the odd coordinates are z^nabla_i = z_i + omega^b_{ai} a^a y_b
and the bracket is built from the elementary table

  {x^i, z^nabla_j} = delta^i_j          {y_a, a^b} = delta_a^b
  {a^c, z^nabla_j} = -omega^c_{dj} a^d   {y_a, z^nabla_j} = omega^b_{aj} y_b
  {z^nabla_i, z^nabla_j} = -R^e_{ijc} a^c y_e

with R^c_{ija} = d_i omega^c_{aj} - d_j omega^c_{ai} + ... as in the algebroid
module.  The substitution z = z^nabla - omega a y reproduces this table; see
:func:`covariant_to_flat`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .algebroid import (ConnectionData, LieAlgebroidData, a_connection_tensor,
                        a_torsion_T, basic_curvature_S, curvature_R, flatten,
                        jacobi_residuals, morphism_residuals)
from .checks import CheckResult, make_check
from .expr import as_expr, const, esum, mul, neg, var
from .fields import TensorField, schouten
from .oddpoly import OddPoly


@dataclass(frozen=True)
class GradedSpace:
    """Coordinate bookkeeping for T*[1]A* over a chart of dim d and rank r."""
    x_names: tuple
    y_names: tuple

    @classmethod
    def of(cls, A: LieAlgebroidData, y_prefix="y"):
        ys = tuple(f"{y_prefix}{a + 1}" for a in range(A.rank))
        if set(ys) & set(A.names):
            raise ValueError("fibre coordinate names collide with chart names")
        return cls(tuple(A.names), ys)

    @property
    def d(self):
        return len(self.x_names)

    @property
    def r(self):
        return len(self.y_names)

    @property
    def names(self):
        return self.x_names + self.y_names

    def z(self, i):
        return GradedPolynomial(self, OddPoly.monomial((i,)))

    def a(self, a):
        return GradedPolynomial(self, OddPoly.monomial((self.d + a,)))

    def func(self, e):
        return GradedPolynomial(self, OddPoly({(): as_expr(e)}))

    def y(self, a):
        return self.func(var(self.y_names[a]))

    def x(self, i):
        return self.func(var(self.x_names[i]))

    def zero(self):
        return GradedPolynomial(self, OddPoly())


class GradedPolynomial:
    """Sum of odd monomials over (z, a) with coefficients in (x, y)."""

    def __init__(self, space: GradedSpace, poly: OddPoly):
        self.space = space
        self.poly = poly

    def _wrap(self, p):
        return GradedPolynomial(self.space, p)

    def __add__(self, o):
        return self._wrap(self.poly + o.poly)

    def __sub__(self, o):
        return self._wrap(self.poly - o.poly)

    def __neg__(self):
        return self._wrap(-self.poly)

    def __mul__(self, o):
        if isinstance(o, GradedPolynomial):
            return self._wrap(self.poly * o.poly)
        return self._wrap(self.poly.scale(o))

    def scale(self, c):
        return self._wrap(self.poly.scale(c))

    @property
    def terms(self):
        return self.poly.terms

    def degrees(self):
        return self.poly.degrees()

    @property
    def degree(self):
        ds = self.degrees()
        if len(ds) > 1:
            raise ValueError(f"inhomogeneous graded polynomial (degrees {ds})")
        return ds[0] if ds else 0

    def coefficients(self):
        return list(self.poly.terms.values())

    def is_zero(self):
        return self.poly.is_zero()

    def y_degree(self):
        """Largest total y-degree over the coefficients (probed by differentiation)."""
        from .expr import diff
        best = 0
        for c in self.coefficients():
            k, cur = 0, [c]
            while any(not e.is_zero for e in cur) and k < 8:
                cur = [diff(e, n) for e in cur for n in self.space.y_names]
                k += 1
            best = max(best, k - 1)
        return best

    def __repr__(self):
        return f"GradedPolynomial({self.poly!r})"


# --- brackets ----------------------------------------------------------------

def _table(space: GradedSpace, conn: ConnectionData | None, A=None):
    """Elementary brackets {u, v} keyed by generator labels.

    Labels: ('x', i), ('y', a) even; ('z', i), ('a', a) odd.
    """
    d, r = space.d, space.r
    one = OddPoly({(): const(1.0)})
    mone = OddPoly({(): const(-1.0)})
    tab = {}
    for i in range(d):
        tab[("x", i), ("z", i)] = one
        tab[("z", i), ("x", i)] = mone
    for a in range(r):
        tab[("y", a), ("a", a)] = one
        tab[("a", a), ("y", a)] = mone
    if conn is None:
        return tab
    ys = [var(n) for n in space.y_names]
    for j in range(d):
        for c in range(r):
            p = OddPoly()
            for dd in range(r):
                w = conn.w(c, dd, j)
                if not w.is_zero:
                    p = p + OddPoly.monomial((d + dd,), neg(w))
            if not p.is_zero():
                tab[("a", c), ("z", j)] = p
                tab[("z", j), ("a", c)] = -p
        for a in range(r):
            e = esum(mul(conn.w(b, a, j), ys[b]) for b in range(r))
            if not e.is_zero:
                tab[("y", a), ("z", j)] = OddPoly({(): e})
                tab[("z", j), ("y", a)] = OddPoly({(): neg(e)})
    R = curvature_R(A, conn)
    for i, j in itertools.permutations(range(d), 2):
        p = OddPoly()
        for c in range(r):
            coeff = esum(mul(R[e][c][i][j], ys[e]) for e in range(r))
            if not coeff.is_zero:
                p = p + OddPoly.monomial((d + c,), neg(coeff))
        if not p.is_zero():
            tab[("z", i), ("z", j)] = p
    return tab


def _partials(space, F: GradedPolynomial, side):
    """Map generator label -> partial derivative (left or right) of F."""
    out = {}
    d = space.d
    for i, n in enumerate(space.x_names):
        out["x", i] = F.poly.even(n)
    for a, n in enumerate(space.y_names):
        out["y", a] = F.poly.even(n)
    odd = F.poly.odd_right if side == "right" else F.poly.odd_left
    for i in range(d):
        out["z", i] = odd(i)
    for a in range(space.r):
        out["a", a] = odd(d + a)
    return out


class BracketMode:
    """'flat', or 'covariant' with connection (and algebroid for R)."""

    def __init__(self, kind="flat", A: LieAlgebroidData | None = None,
                 conn: ConnectionData | None = None):
        if kind not in ("flat", "covariant"):
            raise ValueError(f"unknown bracket mode {kind!r}")
        if kind == "covariant" and (conn is None or A is None):
            raise ValueError("covariant brackets require connection data")
        self.kind = kind
        self.A = A
        self.conn = conn
        self._cache = {}

    @classmethod
    def flat(cls):
        return cls("flat")

    @classmethod
    def covariant(cls, A, conn):
        return cls("covariant", A, conn)

    def table(self, space):
        key = space
        if key not in self._cache:
            self._cache[key] = _table(space, self.conn if self.kind == "covariant" else None,
                                      self.A)
        return self._cache[key]


def gbracket(F: GradedPolynomial, G: GradedPolynomial, mode: BracketMode | None = None):
    """{F, G} = sum over generators u, v of (F d/du from the right) {u, v} (d/dv G)."""
    mode = mode or BracketMode.flat()
    space = F.space
    if G.space != space:
        raise ValueError("graded polynomials live on different spaces")
    tab = mode.table(space)
    dF = _partials(space, F, "right")
    dG = _partials(space, G, "left")
    res = OddPoly()
    for (u, v), b in tab.items():
        fu, gv = dF[u], dG[v]
        if fu.is_zero() or gv.is_zero():
            continue
        res = res + fu * b * gv
    return GradedPolynomial(space, res)


# --- substitution between flat and covariant coordinates -----------------------

def _substitute_odd(space, F: GradedPolynomial, images: dict) -> GradedPolynomial:
    res = OddPoly()
    for key, coeff in F.poly.terms.items():
        term = OddPoly({(): coeff})
        for g in key:
            term = term * images.get(g, OddPoly.monomial((g,)))
        res = res + term
    return GradedPolynomial(space, res)


def _shift(space, conn, sign):
    d, r = space.d, space.r
    ys = [var(n) for n in space.y_names]
    images = {}
    for i in range(d):
        p = OddPoly.monomial((i,))
        for a in range(r):
            coeff = esum(mul(conn.w(b, a, i), ys[b]) for b in range(r))
            if not coeff.is_zero:
                p = p + OddPoly.monomial((d + a,), coeff if sign > 0 else neg(coeff))
        images[i] = p
    return images


def covariant_to_flat(F: GradedPolynomial, conn: ConnectionData) -> GradedPolynomial:
    """Rewrite a polynomial in (z^nabla, a) as one in (z, a): z^nabla = z + omega a y."""
    return _substitute_odd(F.space, F, _shift(F.space, conn, +1))


def flat_to_covariant(F: GradedPolynomial, conn: ConnectionData) -> GradedPolynomial:
    return _substitute_odd(F.space, F, _shift(F.space, conn, -1))


def substitution_bracket(F, G, conn):
    """Covariant bracket via the flat bracket in transformed coordinates."""
    ff, gf = covariant_to_flat(F, conn), covariant_to_flat(G, conn)
    return flat_to_covariant(gbracket(ff, gf, BracketMode.flat()), conn)


# --- Hamiltonians ------------------------------------------------------------------

def theta_pi(pi: TensorField, space: GradedSpace) -> GradedPolynomial:
    """1/2 pi^{ij} z_i z_j (z^nabla in covariant mode; the formula is the same)."""
    p = OddPoly()
    for (i, j), v in pi.comps.items():
        p = p + OddPoly.monomial((i, j), v)
    return GradedPolynomial(space, p)


def theta_A(A: LieAlgebroidData, space: GradedSpace, conn: ConnectionData | None = None,
            covariant=False) -> GradedPolynomial:
    """Flat: -rho^i_a z_i a^a + 1/2 C^c_ab a^a a^b y_c.
    Covariant: -rho^i_a z^nabla_i a^a - 1/2 T^c_ab a^a a^b y_c."""
    d, r = space.d, space.r
    ys = [var(n) for n in space.y_names]
    p = OddPoly()
    for a in range(r):
        for i in range(d):
            rho = as_expr(A.rho[a][i])
            if not rho.is_zero:
                p = p + OddPoly.monomial((i, d + a), neg(rho))
    if covariant:
        T = a_torsion_T(A, conn)
        for a, b in itertools.combinations(range(r), 2):
            coeff = esum(mul(T[c][a][b], ys[c]) for c in range(r))
            p = p + OddPoly.monomial((d + a, d + b), neg(coeff))
    else:
        for a, b in itertools.combinations(range(r), 2):
            coeff = esum(mul(A.C(c, a, b), ys[c]) for c in range(r))
            p = p + OddPoly.monomial((d + a, d + b), coeff)
    return GradedPolynomial(space, p)


def _sample(space, points):
    import numpy as np
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != len(space.names):
        raise ValueError(f"graded sample points need {len(space.names)} coordinates (x, y)")
    return pts


def master_residual(theta: GradedPolynomial, mode: BracketMode, points, tol=1e-10,
                    check_id="graded.master_equation") -> CheckResult:
    """Max |coefficient| of {theta, theta} over (x, y) sample points."""
    sq = gbracket(theta, theta, mode)
    pts = _sample(theta.space, points)
    return make_check(check_id, "classical master equation", sq.coefficients(),
                      theta.space.names, pts, tol, mode=mode.kind)


def _structure_exprs(A, conn, pi):
    """Residual expressions of R, A-nabla pi and S, plus the pi-contracted S."""
    r, d = A.rank, A.chart.dim
    R = flatten(curvature_R(A, conn))
    anp = []
    for a in range(r):
        anp += list(a_connection_tensor(A, conn, A.basis(a), pi).comps.values())
    S = basic_curvature_S(A, conn)
    piS = [esum(mul(pi[i, j], S[c][j][a][b]) for j in range(d))
           for c in range(r) for i in range(d) for a in range(r) for b in range(r)]
    return R, anp, flatten(S), piS


def verify_compatibility(A: LieAlgebroidData, conn: ConnectionData, pi: TensorField, points,
                    tol=1e-9, prefix="graded"):
    """{Theta_pi^nabla, Theta_A^nabla} = 0 versus (A-nabla pi = 0 and S = 0)."""
    space = GradedSpace.of(A)
    pts = _sample(space, points)
    mode = BracketMode.covariant(A, conn)
    br = gbracket(theta_pi(pi, space), theta_A(A, space, conn, covariant=True), mode)
    names = space.names
    c_br = make_check(f"{prefix}.prop_compat_bracket", "compatibility bracket",
                      br.coefficients(), names, pts, tol)
    _, anp, S, piS = _structure_exprs(A, conn, pi)
    c_anp = make_check(f"{prefix}.prop_compat_A_nabla_pi", "A-nabla pi = 0", anp, names, pts,
                       tol)
    c_S = make_check(f"{prefix}.prop_compat_S", "basic curvature S = 0", S, names, pts, tol)
    c_piS = make_check(f"{prefix}.prop_compat_pi_S", "pi contracted with S", piS, names, pts,
                       tol)
    tensor_side = c_anp.passed and c_S.passed
    agree = CheckResult(f"{prefix}.prop_compat_equivalence", "compatibility equivalence",
                        c_br.passed == tensor_side, 0.0, None, 0.5, len(pts),
                        details={"bracket_passes": c_br.passed, "tensors_pass": tensor_side,
                                 "pi_contracted_S_passes": c_piS.passed})
    return [c_br, c_anp, c_S, agree]


def verify_master_equivalence(A: LieAlgebroidData, conn: ConnectionData, pi: TensorField, points,
                   tol=1e-9, prefix="graded"):
    """Master equation of Theta^nabla = Theta_pi^nabla + Theta_A^nabla versus
    (R = 0, A-nabla pi = 0, S = 0), given pi Poisson and A a Lie algebroid."""
    space = GradedSpace.of(A)
    pts = _sample(space, points)
    mode = BracketMode.covariant(A, conn)
    theta = theta_pi(pi, space) + theta_A(A, space, conn, covariant=True)
    m = master_residual(theta, mode, pts, tol, check_id=f"{prefix}.master_equation")
    names = space.names
    R, anp, S, _ = _structure_exprs(A, conn, pi)
    c_R = make_check(f"{prefix}.thm_R", "curvature R = 0", R, names, pts, tol)
    c_anp = make_check(f"{prefix}.thm_A_nabla_pi", "A-nabla pi = 0", anp, names, pts, tol)
    c_S = make_check(f"{prefix}.thm_S", "basic curvature S = 0", S, names, pts, tol)
    pois = make_check(f"{prefix}.thm_poisson", "[pi, pi] = 0",
                      list(schouten(pi, pi).comps.values()), names, pts, tol)
    lie = make_check(f"{prefix}.thm_lie_algebroid", "Lie algebroid axioms",
                     morphism_residuals(A) + jacobi_residuals(A), names, pts, tol)
    triple = c_R.passed and c_anp.passed and c_S.passed
    tensor_side = triple and pois.passed and lie.passed
    agree = CheckResult(f"{prefix}.thm_equivalence", "master equation equivalence",
                        m.passed == tensor_side, 0.0, None, 0.5, len(pts),
                        details={"master_passes": m.passed, "triple_passes": triple,
                                 "poisson": pois.passed, "lie_algebroid": lie.passed})
    return [m, c_R, c_anp, c_S, pois, lie, agree]


def graded_points(space: GradedSpace, n=64, box=(-2.0, 2.0), seed=42):
    from .checks import sample_points
    return sample_points(len(space.names), n, box, seed)
