"""Polynomials in anticommuting variables with expression coefficients.

A monomial is a strictly increasing tuple of odd-variable indices; the
coefficient absorbs the sign of reordering.  This is the common engine behind
the Schouten bracket (odd fibre coordinates of T*[1]M) and the graded Poisson
bracket on T*[1]A*.
"""
from __future__ import annotations

from .expr import ZERO, Expr, add, as_expr, diff, mul, neg


def sort_sign(idx):
    """Return (sign, sorted tuple) for a product of odd generators, or (0, None)
    if a generator repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    # bubble sort counting transpositions; monomials are short
    n = len(idx)
    for i in range(n):
        for j in range(n - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class OddPoly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for k, v in terms.items():
                self._acc(tuple(k), as_expr(v))

    def _acc(self, key, coeff):
        if coeff.is_zero:
            return
        old = self.terms.get(key)
        new = coeff if old is None else add(old, coeff)
        if new.is_zero:
            self.terms.pop(key, None)
        else:
            self.terms[key] = new

    @classmethod
    def monomial(cls, idx, coeff=1.0):
        sign, key = sort_sign(idx)
        p = cls()
        if sign:
            c = as_expr(coeff)
            p._acc(key, c if sign > 0 else neg(c))
        return p

    def copy(self):
        p = OddPoly()
        p.terms = dict(self.terms)
        return p

    def __add__(self, other):
        p = self.copy()
        for k, v in other.terms.items():
            p._acc(k, v)
        return p

    def __sub__(self, other):
        p = self.copy()
        for k, v in other.terms.items():
            p._acc(k, neg(v))
        return p

    def __neg__(self):
        return OddPoly({k: neg(v) for k, v in self.terms.items()})

    def scale(self, c):
        c = as_expr(c)
        p = OddPoly()
        for k, v in self.terms.items():
            p._acc(k, mul(c, v))
        return p

    def __mul__(self, other):
        if not isinstance(other, OddPoly):
            return self.scale(other)
        p = OddPoly()
        for k1, v1 in self.terms.items():
            s1 = set(k1)
            for k2, v2 in other.terms.items():
                if s1.intersection(k2):
                    continue
                sign, key = sort_sign(k1 + k2)
                c = mul(v1, v2)
                p._acc(key, c if sign > 0 else neg(c))
        return p

    __rmul__ = scale

    def degrees(self):
        return sorted({len(k) for k in self.terms})

    def odd_left(self, k):
        """Left derivative with respect to odd generator ``k``."""
        p = OddPoly()
        for key, v in self.terms.items():
            if k in key:
                m = key.index(k)
                rest = key[:m] + key[m + 1:]
                p._acc(rest, v if m % 2 == 0 else neg(v))
        return p

    def odd_right(self, k):
        """Right derivative with respect to odd generator ``k``."""
        p = OddPoly()
        for key, v in self.terms.items():
            if k in key:
                m = key.index(k)
                rest = key[:m] + key[m + 1:]
                p._acc(rest, v if (len(key) - 1 - m) % 2 == 0 else neg(v))
        return p

    def even(self, name):
        """Derivative with respect to the even variable ``name``."""
        p = OddPoly()
        for key, v in self.terms.items():
            p._acc(key, diff(v, name))
        return p

    def coefficient(self, idx) -> Expr:
        sign, key = sort_sign(idx)
        if not sign:
            return ZERO
        c = self.terms.get(key, ZERO)
        return c if sign > 0 else neg(c)

    def is_zero(self):
        return not self.terms

    def __repr__(self):
        body = " + ".join(f"({v})*{list(k)}" for k, v in sorted(self.terms.items()))
        return f"OddPoly({body or '0'})"
