"""Tensor fields on a single chart and the multilinear calculus on them.

Components are expression trees in the chart coordinates.  Forms and
multivectors are stored antisymmetrically: only strictly increasing index
tuples are kept and lookups of permuted indices return the signed canonical
value.  Indices are 0-based internally.

Conventions
-----------
* A k-form has components alpha[i1..ik] = alpha(d_i1, ..., d_ik); so
  ``dx1^dx2`` has component 1 at (0, 1).
* The interior product contracts the first slot.
* The Schouten bracket is computed in odd fibre coordinates theta_i (dual to
  dx^i), ``[P,Q] = sum_i dP/dtheta_i (right) * dQ/dx^i - dP/dx^i * dQ/dtheta_i (left)``.
  On vector fields this is the Lie bracket; with a function in the first
  slot it gives ``[f,Q] = -i_{df} Q``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .expr import ZERO, Expr, add, as_expr, diff, esum, mul, neg, sub
from .oddpoly import OddPoly, sort_sign
from .tape import Tape


@dataclass(frozen=True)
class Chart:
    dim: int
    coord_names: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be at least 1")
        names = tuple(self.coord_names) or tuple(f"x{i + 1}" for i in range(self.dim))
        if len(names) != self.dim:
            raise ValueError(f"chart of dim {self.dim} needs {self.dim} coordinate names")
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be distinct")
        object.__setattr__(self, "coord_names", names)

    def coord(self, i):
        from .expr import var
        return var(self.coord_names[i])


class TensorField:
    """Tensor with ``up`` contravariant and ``down`` covariant indices.

    Index order in keys is (upper..., lower...).  When ``antisymmetric`` is
    set the tensor must be pure (up == 0 or down == 0) and keys are sorted.
    """

    def __init__(self, chart: Chart, up: int, down: int, comps=None, antisymmetric=False):
        if antisymmetric and up and down:
            raise ValueError("antisymmetric storage needs a pure form or multivector")
        self.chart = chart
        self.up = up
        self.down = down
        self.antisymmetric = bool(antisymmetric) and (up + down) > 1
        self.comps: dict = {}
        d = chart.dim
        for key, v in (comps or {}).items():
            key = tuple(key)
            if len(key) != self.rank or any(not 0 <= i < d for i in key):
                raise ValueError(f"index {key} out of range for rank {self.rank}, dim {d}")
            self._set(key, as_expr(v))

    @property
    def rank(self):
        return self.up + self.down

    @property
    def degree(self):
        return self.rank

    def _set(self, key, v):
        if self.antisymmetric:
            sign, key = sort_sign(key)
            if not sign:
                if not v.is_zero:
                    raise ValueError("antisymmetric tensor with repeated index")
                return
            if sign < 0:
                v = neg(v)
        old = self.comps.get(key)
        v = v if old is None else add(old, v)
        if v.is_zero:
            self.comps.pop(key, None)
        else:
            self.comps[key] = v

    def __getitem__(self, key) -> Expr:
        if isinstance(key, int):
            key = (key,)
        key = tuple(key)
        if self.antisymmetric:
            sign, skey = sort_sign(key)
            if not sign:
                return ZERO
            v = self.comps.get(skey, ZERO)
            return v if sign > 0 else neg(v)
        return self.comps.get(key, ZERO)

    def indices(self):
        d = self.chart.dim
        if self.antisymmetric:
            return list(itertools.combinations(range(d), self.rank))
        return list(itertools.product(range(d), repeat=self.rank))

    def like(self, comps):
        return TensorField(self.chart, self.up, self.down, comps, self.antisymmetric)

    def __add__(self, other):
        _check_same(self, other)
        out = self.like(self.comps)
        for k, v in other.comps.items():
            out._set(k, v)
        return out

    def __neg__(self):
        return self.like({k: neg(v) for k, v in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = as_expr(c)
        return self.like({k: mul(c, v) for k, v in self.comps.items()})

    def dense_exprs(self):
        """All components (including permuted ones) in C order."""
        return [self[k] for k in itertools.product(range(self.chart.dim), repeat=self.rank)]

    def eval(self, points) -> np.ndarray:
        """Dense numeric components at each point: shape (n,) + (d,)*rank."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.chart.dim
        if self.rank == 0:
            vals = Tape([self.comps.get((), ZERO)], self.chart.coord_names).eval(pts)
            return vals[:, 0]
        vals = Tape(self.dense_exprs(), self.chart.coord_names).eval(pts)
        return vals.reshape((pts.shape[0],) + (d,) * self.rank)

    def at(self, point) -> np.ndarray:
        return self.eval(np.asarray(point, dtype=float)[None, :])[0]

    def __repr__(self):
        kind = "form" if self.up == 0 else "multivector" if self.down == 0 else "tensor"
        return f"TensorField({kind}, up={self.up}, down={self.down}, nnz={len(self.comps)})"


def _check_same(a, b):
    if (a.chart.dim, a.up, a.down) != (b.chart.dim, b.up, b.down):
        raise ValueError("rank mismatch")


# --- constructors -----------------------------------------------------------

def scalar(chart, e) -> TensorField:
    return TensorField(chart, 0, 0, {(): as_expr(e)})


def vector(chart, comps) -> TensorField:
    comps = list(comps)
    if len(comps) != chart.dim:
        raise ValueError("vector field needs one component per coordinate")
    return TensorField(chart, 1, 0, {(i,): c for i, c in enumerate(comps)})


def one_form(chart, comps) -> TensorField:
    comps = list(comps)
    if len(comps) != chart.dim:
        raise ValueError("1-form needs one component per coordinate")
    return TensorField(chart, 0, 1, {(i,): c for i, c in enumerate(comps)})


def form(chart, degree, comps) -> TensorField:
    return TensorField(chart, 0, degree, comps, antisymmetric=True)


def multivector(chart, degree, comps) -> TensorField:
    return TensorField(chart, degree, 0, comps, antisymmetric=True)


def differential(chart, f) -> TensorField:
    f = as_expr(f)
    return one_form(chart, [diff(f, n) for n in chart.coord_names])


def _scalar_expr(f):
    if isinstance(f, TensorField):
        if f.rank:
            raise ValueError("expected a function")
        return f.comps.get((), ZERO)
    return as_expr(f)


def _vec_list(X, d):
    if isinstance(X, TensorField):
        if (X.up, X.down) != (1, 0):
            raise ValueError("expected a vector field")
        return [X[i] for i in range(d)]
    X = [as_expr(c) for c in X]
    if len(X) != d:
        raise ValueError("vector length does not match chart")
    return X


# --- calculus ---------------------------------------------------------------

def de_rham(alpha: TensorField, point=None):
    """Exterior derivative of a form; a top form maps to zero."""
    if alpha.up:
        raise ValueError("de Rham differential acts on forms")
    ch = alpha.chart
    k = alpha.down
    names = ch.coord_names
    out = TensorField(ch, 0, k + 1, antisymmetric=True)
    if k < ch.dim:
        for idx in itertools.combinations(range(ch.dim), k + 1):
            terms = []
            for j, i in enumerate(idx):
                rest = idx[:j] + idx[j + 1:]
                t = diff(alpha[rest], names[i])
                terms.append(t if j % 2 == 0 else neg(t))
            out._set(idx, esum(terms))
    return out if point is None else out.at(point)


def interior_product(X, alpha: TensorField, point=None):
    """Contract a vector field into the first slot of a form (or a 1-form
    into the first slot of a multivector)."""
    ch = alpha.chart
    d = ch.dim
    if alpha.rank == 0:
        out = TensorField(ch, 0, 0)
        return out if point is None else out.at(point)
    if isinstance(X, TensorField):
        if alpha.up and not alpha.down and (X.up, X.down) != (0, 1):
            raise ValueError("contract a 1-form into a multivector")
        if alpha.down and not alpha.up and (X.up, X.down) != (1, 0):
            raise ValueError("contract a vector field into a form")
        Xc = [X[i] for i in range(d)]
    else:
        Xc = _vec_list(X, d)
    if alpha.up and alpha.down:
        raise ValueError("interior product is defined on forms and multivectors")
    out = TensorField(ch, max(alpha.up - 1, 0), max(alpha.down - 1, 0),
                      antisymmetric=alpha.antisymmetric)
    for rest in out.indices() if out.rank else [()]:
        out._set(rest, esum(mul(Xc[i], alpha[(i,) + rest]) for i in range(d)))
    return out if point is None else out.at(point)


def wedge(alpha: TensorField, beta: TensorField, point=None):
    """Wedge product of two forms (or two multivectors)."""
    if (alpha.up and alpha.down) or (beta.up and beta.down):
        raise ValueError("wedge of pure forms or multivectors only")
    if (alpha.up and beta.down) or (alpha.down and beta.up):
        raise ValueError("cannot wedge a form with a multivector")
    ch = alpha.chart
    p, q = alpha.rank, beta.rank
    up = alpha.up + beta.up
    down = alpha.down + beta.down
    out = TensorField(ch, up, down, antisymmetric=True)
    if p + q <= ch.dim:
        for idx in itertools.combinations(range(ch.dim), p + q):
            terms = []
            for J in itertools.combinations(range(p + q), p):
                K = tuple(m for m in range(p + q) if m not in J)
                sign, _ = sort_sign(J + K)
                t = mul(alpha[tuple(idx[m] for m in J)], beta[tuple(idx[m] for m in K)])
                terms.append(t if sign > 0 else neg(t))
            out._set(idx, esum(terms))
    return out if point is None else out.at(point)


def lie_derivative(X, T: TensorField, point=None):
    """Lie derivative of an arbitrary tensor field along a vector field."""
    ch = T.chart
    d = ch.dim
    names = ch.coord_names
    Xc = _vec_list(X, d)
    dX = [[diff(Xc[i], names[k]) for k in range(d)] for i in range(d)]  # dX[i][k] = d_k X^i
    out = T.like({})
    for idx in (T.indices() if T.rank else [()]):
        terms = [mul(Xc[k], diff(T[idx], names[k])) for k in range(d)]
        for pos in range(T.up):
            for k in range(d):
                terms.append(neg(mul(dX[idx[pos]][k], T[idx[:pos] + (k,) + idx[pos + 1:]])))
        for pos in range(T.up, T.rank):
            for k in range(d):
                terms.append(mul(dX[k][idx[pos]], T[idx[:pos] + (k,) + idx[pos + 1:]]))
        out._set(idx, esum(terms))
    return out if point is None else out.at(point)


def vector_bracket(X, Y, chart) -> list:
    """Lie bracket [X, Y] of vector fields as a component list."""
    d = chart.dim
    names = chart.coord_names
    Xc, Yc = _vec_list(X, d), _vec_list(Y, d)
    return [esum(sub(mul(Xc[k], diff(Yc[i], names[k])), mul(Yc[k], diff(Xc[i], names[k])))
                 for k in range(d)) for i in range(d)]


def to_oddpoly(P: TensorField) -> OddPoly:
    if P.down:
        raise ValueError("expected a multivector")
    if P.rank == 0:
        return OddPoly({(): P.comps.get((), ZERO)})
    return OddPoly({k: v for k, v in P.comps.items()})


def from_oddpoly(chart, p: OddPoly, degree) -> TensorField:
    out = TensorField(chart, degree, 0, antisymmetric=True)
    for k, v in p.terms.items():
        if len(k) != degree:
            raise ValueError("inhomogeneous multivector")
        out._set(k, v)
    return out


def schouten(P, Q) -> TensorField:
    """Schouten bracket of multivector fields (degree 0 means a function)."""
    if not isinstance(P, TensorField) or not isinstance(Q, TensorField):
        raise TypeError("schouten expects TensorField arguments")
    ch = P.chart
    if Q.chart.dim != ch.dim:
        raise ValueError("chart mismatch")
    if P.down or Q.down:
        raise ValueError("Schouten bracket acts on multivectors")
    deg = P.up + Q.up - 1
    if deg < 0:
        return TensorField(ch, 0, 0)
    if deg > ch.dim:
        return TensorField(ch, deg, 0, antisymmetric=True)
    pp, qq = to_oddpoly(P), to_oddpoly(Q)
    res = OddPoly()
    for i, n in enumerate(ch.coord_names):
        res = res + pp.odd_right(i) * qq.even(n) - pp.even(n) * qq.odd_left(i)
    return from_oddpoly(ch, res, deg)


def schouten_bracket(P, Q, point):
    """Dense components of [P, Q] at ``point``."""
    return schouten(P, Q).at(point)


def sharp(pi: TensorField, alpha) -> list:
    """pi#(alpha)^j = alpha_i pi^{ij}."""
    d = pi.chart.dim
    a = _form_list(alpha, d)
    return [esum(mul(a[i], pi[i, j]) for i in range(d)) for j in range(d)]


def flat(omega: TensorField, X) -> list:
    """omega_flat(X)_j = X^i omega_{ij}."""
    d = omega.chart.dim
    Xc = _vec_list(X, d)
    return [esum(mul(Xc[i], omega[i, j]) for i in range(d)) for j in range(d)]


def _form_list(alpha, d):
    if isinstance(alpha, TensorField):
        if (alpha.up, alpha.down) != (0, 1):
            raise ValueError("expected a 1-form")
        return [alpha[i] for i in range(d)]
    a = [as_expr(c) for c in alpha]
    if len(a) != d:
        raise ValueError("1-form length does not match chart")
    return a


def pair(X, alpha, d) -> Expr:
    Xc, a = _vec_list(X, d), _form_list(alpha, d)
    return esum(mul(Xc[i], a[i]) for i in range(d))
