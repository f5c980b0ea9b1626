"""Lattice realization of the (gauged) Poisson sigma model.

The gauged model over a Lie algebroid A with connection is treated as a
Poisson sigma model with target A*: fields phi = (X^i, Y_a), eta = (Z_i, A^a),
gauge parameters eps = (t_i, c^a) and the bivector

  Pi^{ij} = pi^{ij}
  Pi^{ia} = -rho^i_a + pi^{ij} W_{aj}
  Pi^{ab} = C^c_ab y_c + pi^{ij} W_{ai} W_{bj},    W_{ai} = omega^b_{ai} y_b,

which is the flat-coordinate form of Theta_pi^nabla + Theta_A^nabla.  With
omega = 0 the flat action is literally

  Z_i dX^i + 1/2 pi^{ij} Z_i Z_j + Y_a dA^a - rho^i_a Z_i A^a + 1/2 C^c_ab A^a A^b Y_c

and the gauge transformations are delta phi = -Pi eps,
delta eta_I = d eps_I + d_I Pi^{JK} eta_J eps_K.  The covariant form uses
Z^nabla_i = Z_i + omega^b_{ai} A^a Y_b, DA^a = dA^a - omega^a_{bi} A^b dX^i and
t^nabla_i = t_i + omega^b_{ai} c^a Y_b.

Discretization: fields live on sites, one-forms carry two components per
site (the links to +e1 and +e2), d is the forward difference, the wedge is
a_1 b_2 - a_2 b_1 and integrals are h^2 times a pairwise sum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .algebroid import (ConnectionData, LieAlgebroidData, a_connection_tensor, a_torsion_T,
                        cov_dual)
from .checks import from_value, make_check
from .expr import as_expr, diff, esum, mul, neg, var
from .fields import TensorField, multivector
from .graded import GradedSpace
from .tape import Tape

TORUS = "torus"
RECTANGLE = "rectangle"


# --- worldsheet, fields, parameters -----------------------------------------------

@dataclass(frozen=True)
class Worldsheet:
    topology: str
    N: int

    def __post_init__(self):
        if self.topology not in (TORUS, RECTANGLE):
            raise ValueError(f"unknown worldsheet topology {self.topology!r}")
        if self.N < 4:
            raise ValueError("worldsheet needs N >= 4 sites per side")

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def shape(self):
        n = self.N if self.topology == TORUS else self.N + 1
        return (n, n)

    def coords(self):
        """Site coordinates (sigma1, sigma2), shape (n, n, 2)."""
        n = self.shape[0]
        s = np.arange(n) * self.h
        s1, s2 = np.meshgrid(s, s, indexing="ij")
        return np.stack([s1, s2], axis=-1)

    def boundary_sites(self):
        """Counterclockwise boundary loop of the rectangle as (i, j) site indices."""
        if self.topology != RECTANGLE:
            return []
        N = self.N
        loop = [(i, 0) for i in range(N)] + [(N, j) for j in range(N)]
        loop += [(i, N) for i in range(N, 0, -1)] + [(0, j) for j in range(N, 0, -1)]
        return loop


@dataclass
class FieldConfig:
    X: np.ndarray   # (n, n, d)
    Z: np.ndarray   # (n, n, 2, d)
    A: np.ndarray   # (n, n, 2, r)
    Y: np.ndarray   # (n, n, r)

    def axpy(self, eps, other: "FieldConfig") -> "FieldConfig":
        return FieldConfig(self.X + eps * other.X, self.Z + eps * other.Z,
                           self.A + eps * other.A, self.Y + eps * other.Y)


@dataclass
class GaugeParams:
    t: np.ndarray   # (n, n, d)
    c: np.ndarray   # (n, n, r)

    def scale(self, k):
        return GaugeParams(k * self.t, k * self.c)


# --- dual numbers over arrays ------------------------------------------------------

class Dual:
    """a + eps b with eps^2 = 0, for exact first-order directional derivatives."""
    __slots__ = ("v", "e")

    def __init__(self, v, e=None):
        self.v = np.asarray(v, dtype=float)
        self.e = np.zeros_like(self.v) if e is None else np.asarray(e, dtype=float)

    def __getitem__(self, k):
        return Dual(self.v[k], self.e[k])

    def __add__(self, o):
        o = _lift(o)
        return Dual(self.v + o.v, self.e + o.e)

    __radd__ = __add__

    def __sub__(self, o):
        o = _lift(o)
        return Dual(self.v - o.v, self.e - o.e)

    def __rsub__(self, o):
        return _lift(o) - self

    def __neg__(self):
        return Dual(-self.v, -self.e)

    def __mul__(self, o):
        o = _lift(o)
        return Dual(self.v * o.v, self.v * o.e + self.e * o.v)

    __rmul__ = __mul__


def _lift(x):
    return x if isinstance(x, Dual) else Dual(x)


def _dsum(x: Dual):
    # np.sum over a contiguous 1-D array uses pairwise summation: fixed order
    return Dual(np.sum(np.ascontiguousarray(x.v).ravel()),
                np.sum(np.ascontiguousarray(x.e).ravel()))


# --- target data ------------------------------------------------------------------

class TargetFunctions:
    """Compiled target functions of (x, y) with first derivatives."""

    def __init__(self, exprs: dict, names):
        self.keys = list(exprs)
        self.names = list(names)
        flat = [as_expr(exprs[k]) for k in self.keys]
        grads = [diff(e, n) for e in flat for n in self.names]
        self._val = Tape(flat, self.names)
        self._grad = Tape(grads, self.names)
        self._nk = len(self.keys)

    def eval(self, phi: Dual) -> dict:
        """Map key -> Dual field values at every site; phi has shape (..., nvars)."""
        shp = phi.v.shape[:-1]
        pts = phi.v.reshape(-1, phi.v.shape[-1])
        vals = self._val.eval(pts) if self._nk else np.zeros((pts.shape[0], 0))
        out = {}
        if not self._nk:
            return out
        g = self._grad.eval(pts).reshape(pts.shape[0], self._nk, len(self.names))
        de = phi.e.reshape(-1, phi.e.shape[-1])
        eps = np.einsum("pkn,pn->pk", g, de)
        for k, key in enumerate(self.keys):
            out[key] = Dual(vals[:, k].reshape(shp), eps[:, k].reshape(shp))
        return out

    def eval_plain(self, pts):
        return self._val.eval(pts)


class SigmaModel:
    """Target data (A, nabla, pi) and the derived bivector Pi on A*."""

    def __init__(self, A: LieAlgebroidData, conn: ConnectionData | None, pi: TensorField):
        self.A = A
        self.conn = conn or ConnectionData.trivial(A.rank, A.chart.dim)
        self.pi = pi
        self.space = GradedSpace.of(A)
        self.d, self.r = A.chart.dim, A.rank
        self.names = list(self.space.names)
        self.Pi = self._big_pi()
        self._flat = TargetFunctions(self.Pi, self.names)
        self._cov = TargetFunctions(self._cov_exprs(), self.names)

    # Pi indices: 0..d-1 for x/z, d..d+r-1 for y/a
    def _big_pi(self):
        d, r = self.d, self.r
        A, conn, pi = self.A, self.conn, self.pi
        ys = [var(n) for n in self.space.y_names]
        W = [[esum(mul(conn.w(b, a, i), ys[b]) for b in range(r)) for i in range(d)]
             for a in range(r)]
        P = {}
        for i, j in itertools.combinations(range(d), 2):
            P[i, j] = pi[i, j]
        for i in range(d):
            for a in range(r):
                P[i, d + a] = esum([neg(as_expr(A.rho[a][i]))]
                                   + [mul(pi[i, j], W[a][j]) for j in range(d)])
        for a, b in itertools.combinations(range(r), 2):
            P[d + a, d + b] = esum([mul(A.C(c, a, b), ys[c]) for c in range(r)]
                                   + [mul(mul(pi[i, j], W[a][i]), W[b][j])
                                      for i in range(d) for j in range(d)])
        return {k: v for k, v in P.items()}

    def _cov_exprs(self):
        d, r = self.d, self.r
        out = {}
        for i, j in itertools.combinations(range(d), 2):
            out["pi", i, j] = self.pi[i, j]
        for a in range(r):
            for i in range(d):
                out["rho", a, i] = as_expr(self.A.rho[a][i])
                for b in range(r):
                    out["w", b, a, i] = self.conn.w(b, a, i)
        T = a_torsion_T(self.A, self.conn)
        for c in range(r):
            for a, b in itertools.combinations(range(r), 2):
                out["T", c, a, b] = T[c][a][b]
        return out

    def pi_matrix(self, vals):
        n = self.d + self.r
        M = [[None] * n for _ in range(n)]
        for (I, J), v in vals.items():
            M[I][J] = v
            M[J][I] = -v
        return M


# --- discrete calculus ------------------------------------------------------------

def _shift(a, axis, ws):
    if ws.topology == TORUS:
        return np.roll(a, -1, axis=axis)
    return np.concatenate([np.take(a, range(1, a.shape[axis]), axis=axis),
                           np.take(a, [-1], axis=axis)], axis=axis)


def _d0(f: Dual, ws):
    """Forward-difference gradient of a site field: (..., 2) appended before last axis."""
    h = ws.h
    d1 = Dual((_shift(f.v, 0, ws) - f.v) / h, (_shift(f.e, 0, ws) - f.e) / h)
    d2 = Dual((_shift(f.v, 1, ws) - f.v) / h, (_shift(f.e, 1, ws) - f.e) / h)
    return d1, d2


def _d1(a1: Dual, a2: Dual, ws):
    """(dA)_{12} = d_1 A_2 - d_2 A_1."""
    h = ws.h
    v = (_shift(a2.v, 0, ws) - a2.v) / h - (_shift(a1.v, 1, ws) - a1.v) / h
    e = (_shift(a2.e, 0, ws) - a2.e) / h - (_shift(a1.e, 1, ws) - a1.e) / h
    return Dual(v, e)


def _wedge(a1, a2, b1, b2):
    return a1 * b2 - a2 * b1


def _interior(x: Dual, ws):
    """Restrict to plaquette base sites (drop the last row/column on the rectangle)."""
    if ws.topology == TORUS:
        return x
    return x[:-1, :-1]


def _to_dual(cfg: FieldConfig, dcfg: FieldConfig | None):
    if dcfg is None:
        return (Dual(cfg.X), Dual(cfg.Z), Dual(cfg.A), Dual(cfg.Y))
    return (Dual(cfg.X, dcfg.X), Dual(cfg.Z, dcfg.Z), Dual(cfg.A, dcfg.A), Dual(cfg.Y, dcfg.Y))


def _check_dims(model, cfg):
    if cfg.X.shape[-1] != model.d or cfg.Z.shape[-1] != model.d:
        raise ValueError("field configuration does not match the target dimension")
    if cfg.A.shape[-1] != model.r or cfg.Y.shape[-1] != model.r:
        raise ValueError("field configuration does not match the algebroid rank")


def _lagrangian_flat(model: SigmaModel, ws, X, Z, A, Y):
    d, r = model.d, model.r
    phi = Dual(np.concatenate([X.v, Y.v], -1), np.concatenate([X.e, Y.e], -1))
    P = model._flat.eval(phi)
    dX1, dX2 = _d0(X, ws)
    L = Dual(np.zeros(X.v.shape[:-1]))
    for i in range(d):
        L = L + _wedge(Z[..., 0, i], Z[..., 1, i], dX1[..., i], dX2[..., i])
    for a in range(r):
        L = L + Y[..., a] * _d1(A[..., 0, a], A[..., 1, a], ws)

    def eta(I, mu):
        return Z[..., mu, I] if I < d else A[..., mu, I - d]
    for (I, J), p in P.items():
        L = L + p * _wedge(eta(I, 0), eta(I, 1), eta(J, 0), eta(J, 1))
    return L


def _lagrangian_cov(model: SigmaModel, ws, X, Zc, A, Y):
    """Covariant form with Z^nabla as the independent one-form field."""
    d, r = model.d, model.r
    phi = Dual(np.concatenate([X.v, Y.v], -1), np.concatenate([X.e, Y.e], -1))
    F = model._cov.eval(phi)
    zero = Dual(np.zeros(X.v.shape[:-1]))

    def g(key):
        return F.get(key, zero)
    dX1, dX2 = _d0(X, ws)
    L = zero
    for i in range(d):
        L = L + _wedge(Zc[..., 0, i], Zc[..., 1, i], dX1[..., i], dX2[..., i])
    for a in range(r):
        DA = _d1(A[..., 0, a], A[..., 1, a], ws)
        for b in range(r):
            for i in range(d):
                w = g(("w", a, b, i))
                DA = DA - w * _wedge(A[..., 0, b], A[..., 1, b], dX1[..., i], dX2[..., i])
        L = L + Y[..., a] * DA
    for i, j in itertools.combinations(range(d), 2):
        L = L + g(("pi", i, j)) * _wedge(Zc[..., 0, i], Zc[..., 1, i], Zc[..., 0, j],
                                         Zc[..., 1, j])
    for a in range(r):
        for i in range(d):
            L = L - g(("rho", a, i)) * _wedge(Zc[..., 0, i], Zc[..., 1, i], A[..., 0, a],
                                              A[..., 1, a])
    for c in range(r):
        for a, b in itertools.combinations(range(r), 2):
            L = L - g(("T", c, a, b)) * _wedge(A[..., 0, a], A[..., 1, a], A[..., 0, b],
                                               A[..., 1, b]) * Y[..., c]
    return L


def _integrate(L: Dual, ws):
    s = _dsum(_interior(L, ws))
    return Dual(ws.h ** 2 * s.v, ws.h ** 2 * s.e)


def action_psm(pi: TensorField, ws: Worldsheet, cfg: FieldConfig) -> float:
    """Discretized Poisson sigma model action: integral of Z dX + 1/2 pi Z Z."""
    d = pi.chart.dim
    if cfg.X.shape[-1] != d or cfg.Z.shape[-1] != d:
        raise ValueError("field configuration does not match the target dimension")
    model = SigmaModel(zero_algebroid(pi.chart), None, pi)
    n = cfg.X.shape[:2]
    c0 = FieldConfig(cfg.X, cfg.Z, np.zeros(n + (2, 1)), np.zeros(n + (1,)))
    return float(_integrate(_lagrangian_flat(model, ws, *_to_dual(c0, None)), ws).v)


def zero_algebroid(chart) -> LieAlgebroidData:
    """Rank-one algebroid with zero anchor and bracket (the plain Poisson model)."""
    return LieAlgebroidData(chart, 1, [[0.0] * chart.dim])


def to_covariant(model: SigmaModel, cfg: FieldConfig) -> FieldConfig:
    """Replace Z by Z^nabla = Z + omega A Y."""
    W = _w_sites(model, cfg.X)
    Zc = cfg.Z + np.einsum("...bai,...ma,...b->...mi", W, cfg.A, cfg.Y)
    return FieldConfig(cfg.X, Zc, cfg.A, cfg.Y)


def _w_sites(model, X):
    d, r = model.d, model.r
    pts = X.reshape(-1, d)
    exprs = [model.conn.w(b, a, i) for b in range(r) for a in range(r) for i in range(d)]
    if not exprs:
        return np.zeros(X.shape[:-1] + (r, r, d))
    vals = Tape(exprs, model.A.names).eval(pts)
    return vals.reshape(X.shape[:-1] + (r, r, d))


def action_gpsm(model: SigmaModel, ws: Worldsheet, cfg: FieldConfig, covariant=False) -> float:
    """Gauged action; ``covariant`` evaluates the Z^nabla / DA / T form."""
    _check_dims(model, cfg)
    if covariant:
        c = to_covariant(model, cfg)
        L = _lagrangian_cov(model, ws, *_to_dual(c, None))
    else:
        L = _lagrangian_flat(model, ws, *_to_dual(cfg, None))
    return float(_integrate(L, ws).v)


# --- gauge transformations ------------------------------------------------------------

def _site_funcs(model, X, Y):
    """Pi and its first derivatives at every site (plain arrays)."""
    d, r = model.d, model.r
    n = d + r
    pts = np.concatenate([X, Y], -1).reshape(-1, n)
    tf = model._flat
    vals = tf.eval_plain(pts) if tf.keys else np.zeros((pts.shape[0], 0))
    grads = (tf._grad.eval(pts).reshape(pts.shape[0], len(tf.keys), n) if tf.keys
             else np.zeros((pts.shape[0], 0, n)))
    P = np.zeros((pts.shape[0], n, n))
    dP = np.zeros((pts.shape[0], n, n, n))   # dP[p, K, I, J] = d_K Pi^{IJ}
    for k, (I, J) in enumerate(tf.keys):
        P[:, I, J] = vals[:, k]
        P[:, J, I] = -vals[:, k]
        dP[:, :, I, J] = grads[:, k, :]
        dP[:, :, J, I] = -grads[:, k, :]
    shp = X.shape[:-1]
    return P.reshape(shp + (n, n)), dP.reshape(shp + (n, n, n))


def _grad_sites(f, ws):
    h = ws.h
    return np.stack([(_shift(f, 0, ws) - f) / h, (_shift(f, 1, ws) - f) / h], axis=-2)


def gauge_transform(model: SigmaModel, ws: Worldsheet, cfg: FieldConfig, params: GaugeParams,
                    covariant=False, y_variant="full") -> FieldConfig:
    """First-order field increments.

    Flat: delta X = -pi t + rho c (+ omega terms through Pi), delta A, delta Y,
    delta Z as the A*-target Poisson sigma model transformations.  Covariant:
    the same transformation written for (X, Z^nabla, A, Y) with the parameter
    t^nabla; ``params.t`` is then read as t^nabla.

    ``y_variant="algebroid"`` keeps only the c-dependent part of delta Y.
    """
    if y_variant not in ("full", "algebroid"):
        raise ValueError("y_variant must be 'full' or 'algebroid'")
    _check_dims(model, cfg)
    d = model.d
    t = params.t
    if covariant:
        W = _w_sites(model, cfg.X)
        t = t - np.einsum("...bai,...a,...b->...i", W, params.c, cfg.Y)
    eps = np.concatenate([t, params.c], -1)
    eta = np.concatenate([cfg.Z, cfg.A], -1)
    P, dP = _site_funcs(model, cfg.X, cfg.Y)
    dphi = -np.einsum("...IJ,...J->...I", P, eps)
    deta = _grad_sites(eps, ws) + np.einsum("...KIJ,...mI,...J->...mK", dP, eta, eps)
    if y_variant == "algebroid":
        eps_c = np.concatenate([np.zeros_like(t), params.c], -1)
        dphi[..., d:] = -np.einsum("...IJ,...J->...I", P, eps_c)[..., d:]
    out = FieldConfig(dphi[..., :d], deta[..., :d], deta[..., d:], dphi[..., d:])
    if not covariant:
        return out
    # delta Z^nabla = delta Z + d_k omega dX^k A Y + omega (dA Y + A dY)
    W = _w_sites(model, cfg.X)
    dW = _dw_sites(model, cfg.X)
    dZc = out.Z + np.einsum("...baik,...k,...ma,...b->...mi", dW, out.X, cfg.A, cfg.Y)
    dZc += np.einsum("...bai,...ma,...b->...mi", W, out.A, cfg.Y)
    dZc += np.einsum("...bai,...ma,...b->...mi", W, cfg.A, out.Y)
    return FieldConfig(out.X, dZc, out.A, out.Y)


def _dw_sites(model, X):
    d, r = model.d, model.r
    names = model.A.names
    exprs = [diff(model.conn.w(b, a, i), names[k]) for b in range(r) for a in range(r)
             for i in range(d) for k in range(d)]
    if not exprs:
        return np.zeros(X.shape[:-1] + (r, r, d, d))
    vals = Tape(exprs, names).eval(X.reshape(-1, d))
    return vals.reshape(X.shape[:-1] + (r, r, d, d))


def gauge_variation(model: SigmaModel, ws: Worldsheet, cfg: FieldConfig, params: GaugeParams,
                    covariant=False, y_variant="full") -> float:
    """Exact epsilon-derivative of the discrete action along the gauge direction."""
    delta = gauge_transform(model, ws, cfg, params, covariant, y_variant)
    if covariant:
        c = to_covariant(model, cfg)
        L = _lagrangian_cov(model, ws, *_to_dual(c, delta))
    else:
        L = _lagrangian_flat(model, ws, *_to_dual(cfg, delta))
    return float(_integrate(L, ws).e)


# --- configurations -----------------------------------------------------------------

WS_NAMES = ("s1", "s2", "pi")


def expr_field(ws: Worldsheet, sources, shape_tail):
    """Sample expression strings in (s1, s2, pi) on the worldsheet sites."""
    from .parser import parse_expr
    flat = list(np.asarray(sources, dtype=object).ravel())
    exprs = [parse_expr(str(s), list(WS_NAMES)) for s in flat]
    xy = ws.coords().reshape(-1, 2)
    pts = np.concatenate([xy, np.full((xy.shape[0], 1), math.pi)], axis=1)
    vals = Tape(exprs, list(WS_NAMES)).eval(pts)
    return vals.reshape(ws.shape + tuple(shape_tail))


def _fourier(rng, ws, count, modes=1, amp=1.0, periodic=True):
    """Smooth random fields: low Fourier modes with seeded coefficients."""
    S = ws.coords()
    s1, s2 = S[..., 0], S[..., 1]
    out = np.zeros(ws.shape + (count,))
    for k in range(count):
        acc = np.zeros(ws.shape)
        for m, n in itertools.product(range(modes + 1), repeat=2):
            a, b = rng.uniform(-1, 1, 2) * amp / (1 + m + n)
            ph = 2 * math.pi * (m * s1 + n * s2)
            acc += a * np.cos(ph) + b * np.sin(ph)
        out[..., k] = acc
    return out


def random_config(model: SigmaModel, ws: Worldsheet, seed=7, amp=0.5, x0=None,
                  clamp=False, frame=False) -> FieldConfig:
    """Seeded smooth configuration (numpy PCG64).  With ``clamp`` X equals x0 on
    the boundary: X = x0 + sin(pi s1) sin(pi s2) f.  ``frame`` adds the constant
    one-form Z = dx^1 ds1 + dx^2 ds2 so Z wedge Z has a nonzero mean."""
    rng = np.random.default_rng(seed)
    d, r = model.d, model.r
    X = _fourier(rng, ws, d, amp=amp)
    if x0 is not None:
        X = X + np.asarray(x0, dtype=float)
    if clamp:
        S = ws.coords()
        bump = np.sin(math.pi * S[..., 0]) * np.sin(math.pi * S[..., 1])
        base = np.asarray(x0 if x0 is not None else np.zeros(d), dtype=float)
        X = base + bump[..., None] * (X - base)
        X[0, :], X[-1, :], X[:, 0], X[:, -1] = base, base, base, base
    Z = _fourier(rng, ws, 2 * d, amp=amp).reshape(ws.shape + (2, d))
    if frame:
        for mu in range(min(2, d)):
            Z[..., mu, mu] += 1.0
    A = _fourier(rng, ws, 2 * r, amp=amp).reshape(ws.shape + (2, r))
    Y = _fourier(rng, ws, r, amp=amp)
    return FieldConfig(X, Z, A, Y)


def random_params(model: SigmaModel, ws: Worldsheet, seed=11, amp=0.5,
                  frame=False) -> GaugeParams:
    """Seeded smooth gauge parameters; ``frame`` adds the constant t = dx^d."""
    rng = np.random.default_rng(seed)
    t = _fourier(rng, ws, model.d, amp=amp)
    if frame:
        t[..., model.d - 1] += 1.0
    return GaugeParams(t, _fourier(rng, ws, model.r, amp=amp))


def zero_config(model, ws):
    n = ws.shape
    d, r = model.d, model.r
    return FieldConfig(np.zeros(n + (d,)), np.zeros(n + (2, d)), np.zeros(n + (2, r)),
                       np.zeros(n + (r,)))


def convergence_orders(values):
    """log2 of successive ratios |v_k| / |v_{k+1}| for grids doubling in N."""
    out = []
    for a, b in zip(values, values[1:]):
        out.append(math.log2(abs(a) / abs(b)) if a and b else float("inf"))
    return out


def test_configuration(model, ws, seed=7):
    """The fixed smooth test configuration used for convergence measurements."""
    x0 = np.ones(model.d)
    return (random_config(model, ws, seed=seed, x0=x0, frame=True, amp=0.3),
            random_params(model, ws, seed=seed + 1, frame=True, amp=0.3))


def gauge_convergence(model, grid=(8, 16, 32), seed=7, covariant=False, y_variant="full"):
    """|delta S| on tori of increasing size (same smooth data resampled)."""
    vals = []
    for N in grid:
        ws = Worldsheet(TORUS, N)
        cfg, par = test_configuration(model, ws, seed)
        vals.append(abs(gauge_variation(model, ws, cfg, par, covariant, y_variant)))
    return vals, convergence_orders(vals)


# --- boundary terms --------------------------------------------------------------------

@dataclass
class BoundaryVariation:
    total: float
    terms: list                  # integrated value of each of the three terms
    coefficient_residuals: list  # max |coefficient| of terms 2 and 3 on boundary sites
    per_point: dict = field(default_factory=dict)


def _boundary_coeffs(model: SigmaModel, mu, Xb, U=None):
    """Coefficient fields at boundary sites: nabla mu, rho - P nabla mu, equivariance."""
    A, conn = model.A, model.conn
    d, r = model.d, model.r
    N = cov_dual(A, conn, mu)
    names = A.names
    exprs = [N[a][i] for a in range(r) for i in range(d)]
    P = model.pi if U is None else U
    exprs += [esum([as_expr(A.rho[a][i])]
                   + [neg(mul(P[i, j], N[a][j])) for j in range(d)])
              for a in range(r) for i in range(d)]
    exprs += [esum([mul(A.rho[a][i], diff(as_expr(mu[b]), names[i])) for i in range(d)]
                   + [neg(mul(A.C(c, a, b), as_expr(mu[c]))) for c in range(r)])
              for a in range(r) for b in range(r)]
    vals = Tape(exprs, names).eval(Xb)
    k = r * d
    return (vals[:, :k].reshape(-1, r, d), vals[:, k:2 * k].reshape(-1, r, d),
            vals[:, 2 * k:].reshape(-1, r, r))


def boundary_variation(model: SigmaModel, ws: Worldsheet, cfg: FieldConfig, params: GaugeParams,
                       mu, U=None) -> BoundaryVariation:
    """Discretized boundary integrand of the gauge variation of the action with
    the boundary term mu_a A^a, summed counterclockwise over boundary links:
      (t_i - nabla_i mu_a c^a) dX^i - (rho^i_a - P^{ij} nabla_j mu_a) t_i A^a
      + (rho^i_a d_i mu_b - C^c_ab mu_c) c^a A^b,
    with P = pi (or U for the generalized Dirac model)."""
    if ws.topology != RECTANGLE:
        raise ValueError("boundary variation needs a worldsheet with boundary")
    loop = ws.boundary_sites()
    nxt = loop[1:] + loop[:1]
    idx = tuple(np.array(loop).T)
    jdx = tuple(np.array(nxt).T)
    Xb = cfg.X[idx]
    dX = cfg.X[jdx] - Xb
    # link one-form pairing: A along the step direction, times the signed length
    step = np.array(nxt) - np.array(loop)
    h = ws.h
    Ab = np.zeros((len(loop), model.r))
    for k, (s, st) in enumerate(zip(loop, step)):
        mu_dir = 0 if st[0] else 1
        sgn = float(st[0] + st[1])
        base = s if sgn > 0 else tuple(np.array(s) + st)
        Ab[k] = sgn * h * cfg.A[base][mu_dir]
    tb, cb = params.t[idx], params.c[idx]
    Nmu, c2, c3 = _boundary_coeffs(model, mu, Xb, U)
    term1 = np.einsum("pi,pi->p", tb - np.einsum("pai,pa->pi", Nmu, cb), dX)
    term2 = -np.einsum("pai,pi,pa->p", c2, tb, Ab)
    term3 = np.einsum("pab,pa,pb->p", c3, cb, Ab)
    terms = [float(np.sum(term1)), float(np.sum(term2)), float(np.sum(term3))]
    return BoundaryVariation(float(np.sum(term1 + term2 + term3)), terms,
                             [float(np.max(np.abs(c2))) if c2.size else 0.0,
                              float(np.max(np.abs(c3))) if c3.size else 0.0],
                             {"rho_minus_P_nabla_mu": c2, "equivariance": c3,
                              "clamp_defect": float(np.max(np.abs(dX))) if dX.size else 0.0})


# --- generalized Dirac sigma model: algebraic data ------------------------------------

def _det(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    terms = []
    for j in range(n):
        if M[0][j].is_zero:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        t = mul(M[0][j], _det(minor))
        terms.append(t if j % 2 == 0 else neg(t))
    return esum(terms)


def expr_inverse(M):
    """Symbolic inverse by cofactors (small matrices only)."""
    from .expr import div
    n = len(M)
    M = [[as_expr(v) for v in row] for row in M]
    D = _det(M)
    if D.is_zero:
        raise ZeroDivisionError("singular matrix")
    inv = [[None] * n for _ in range(n)]
    for i, j in itertools.product(range(n), repeat=2):
        minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
        cof = _det(minor) if minor else as_expr(1.0)
        if (i + j) % 2:
            cof = neg(cof)
        inv[j][i] = div(cof, D)
    return inv


def _matmul(P, Q):
    n, m, k = len(P), len(Q), len(Q[0])
    return [[esum(mul(as_expr(P[i][l]), as_expr(Q[l][j])) for l in range(m)) for j in range(k)]
            for i in range(n)]


@dataclass
class GDSMAlgebraicData:
    chart: object
    g: list          # d x d expressions
    O: list          # d x d expressions, g-orthogonal
    mu: list = field(default_factory=list)

    def identity(self):
        d = self.chart.dim
        return [[as_expr(1.0 if i == j else 0.0) for j in range(d)] for i in range(d)]

    def U_exprs(self):
        """U = (id - O)(id + O)^{-1} g^{-1}."""
        d = self.chart.dim
        I = self.identity()
        ImO = [[esum([I[i][j], neg(as_expr(self.O[i][j]))]) for j in range(d)] for i in range(d)]
        IpO = [[esum([I[i][j], as_expr(self.O[i][j])]) for j in range(d)] for i in range(d)]
        return _matmul(_matmul(ImO, expr_inverse(IpO)), expr_inverse(self.g))

    def U_field(self) -> TensorField:
        d = self.chart.dim
        U = self.U_exprs()
        return multivector(self.chart, 2, {(i, j): U[i][j] for i in range(d)
                                           for j in range(i + 1, d)})


def gdsm_U(gd: GDSMAlgebraicData, point) -> np.ndarray:
    """Numeric U at ``point``; raises on singular id + O."""
    d = gd.chart.dim
    p = np.asarray(point, dtype=float)[None, :]
    names = list(gd.chart.coord_names)
    g = Tape([as_expr(v) for row in gd.g for v in row], names).eval(p).reshape(d, d)
    O = Tape([as_expr(v) for row in gd.O for v in row], names).eval(p).reshape(d, d)
    I = np.eye(d)
    M = I + O
    if abs(np.linalg.det(M)) < 1e-12 * max(1.0, np.abs(M).max() ** d):
        raise ZeroDivisionError("id + O is singular at this point")
    return (I - O) @ np.linalg.inv(M) @ np.linalg.inv(g)


def gdsm_structure_checks(gd: GDSMAlgebraicData, points, tol=1e-10, seed=3, prefix="gdsm"):
    """Orthogonality, antisymmetry of U and the parametrization test V = U Z for
    Z = g(id + O) a, V = (id - O) a; alternative factor orderings are reported."""
    d = gd.chart.dim
    names = list(gd.chart.coord_names)
    pts = np.atleast_2d(points)
    gv = Tape([as_expr(v) for row in gd.g for v in row], names).eval(pts).reshape(-1, d, d)
    Ov = Tape([as_expr(v) for row in gd.O for v in row], names).eval(pts).reshape(-1, d, d)
    rng = np.random.default_rng(seed)
    I = np.eye(d)
    orth = anti = order = 0.0
    alt = {"g^-1 (id-O)(id+O)^-1": 0.0, "(id+O)^-1 g^-1 (id-O)": 0.0}
    for g, O in zip(gv, Ov):
        orth = max(orth, np.abs(O.T @ g @ O - g).max())
        U = (I - O) @ np.linalg.inv(I + O) @ np.linalg.inv(g)
        anti = max(anti, np.abs(U + U.T).max())
        a = rng.normal(size=d)
        Z = g @ (I + O) @ a
        V = (I - O) @ a
        order = max(order, np.abs(U @ Z - V).max())
        U1 = np.linalg.inv(g) @ (I - O) @ np.linalg.inv(I + O)
        U2 = np.linalg.inv(I + O) @ np.linalg.inv(g) @ (I - O)
        alt["g^-1 (id-O)(id+O)^-1"] = max(alt["g^-1 (id-O)(id+O)^-1"], np.abs(U1 @ Z - V).max())
        alt["(id+O)^-1 g^-1 (id-O)"] = max(alt["(id+O)^-1 g^-1 (id-O)"], np.abs(U2 @ Z - V).max())
    return [from_value(f"{prefix}.orthogonality", "O^T g O = g", orth, tol, len(pts)),
            from_value(f"{prefix}.U_antisymmetry", "U + U^T = 0", anti, tol, len(pts)),
            from_value(f"{prefix}.U_ordering", "V = U Z on the parametrization", order, tol,
                       len(pts), alternatives={k: float(v) for k, v in alt.items()})]


def check_gdsm_D1(md, gd: GDSMAlgebraicData, points, tol=1e-9, prefix="gdsm"):
    """A-nabla U = 0 against the D1 check on the graph of U."""
    from .courant import graph_poisson, standard
    from .momentum import Geometry, MomentumData, check_D1
    A, conn = md.algebroid, md.connection
    Uf = gd.U_field()
    res = []
    for a in range(A.rank):
        res += list(a_connection_tensor(A, conn, A.basis(a), Uf).comps.values())
    r1 = make_check(f"{prefix}.A_nabla_U", "A-nabla U = 0", res, A.names, points, tol)
    geo = Geometry("dirac", courant=standard(A.chart), frame=graph_poisson(Uf.scale(md.sign)))
    md2 = MomentumData(A, conn, md.mu, geo, md.sign, md.action)
    d1 = check_D1(md2, points, tol, prefix=prefix)[0]
    r1.details["D1_verdict"] = d1.passed
    r1.details["agrees_with_D1"] = d1.passed == r1.passed
    return [r1, d1]


def check_boundary_conditions(md, points, tol=1e-9, gd: GDSMAlgebraicData | None = None,
                              prefix="boundary", ws_N=16, seed=5):
    """Pointwise boundary-condition residuals (Poisson case, or the generalized
    Dirac case when ``gd`` is given) plus the clamp check on a lattice."""
    A = md.algebroid
    names = A.names
    d, r = A.chart.dim, A.rank
    N = cov_dual(A, md.connection, md.mu)
    P = md.geometry.pi if gd is None else gd.U_field()
    rho_res = [esum([as_expr(A.rho[a][i])] + [neg(mul(P[i, j], N[a][j])) for j in range(d)])
               for a in range(r) for i in range(d)]
    eq = [esum([mul(A.rho[a][i], diff(md.mu[b], names[i])) for i in range(d)]
               + [neg(mul(A.C(c, a, b), md.mu[c])) for c in range(r)])
          for a in range(r) for b in range(r)]
    tag = ("bou02", "bou04") if gd is None else ("bou12", "bou14")
    model = SigmaModel(A, md.connection, P)
    ws = Worldsheet(RECTANGLE, ws_N)
    cfg = random_config(model, ws, seed=seed, x0=np.ones(d), clamp=True)
    loop = ws.boundary_sites()
    Xb = cfg.X[tuple(np.array(loop).T)]
    clamp = float(np.max(np.abs(Xb - Xb[0])))
    first = "bou01" if gd is None else "bou11"
    out = [from_value(f"{prefix}.{first}", "X constant on the boundary", clamp, tol, len(loop)),
           make_check(f"{prefix}.{tag[0]}", "rho - P nabla mu = 0", rho_res, names, points, tol),
           make_check(f"{prefix}.{tag[1]}", "rho(e_a) mu_b - mu([e_a, e_b]) = 0", eq, names,
                      points, tol)]
    if gd is not None:
        out.append(_parametrization_solve(md, gd, points, tol, prefix))
    return out


def _parametrization_solve(md, gd, points, tol, prefix):
    """Least-squares b with nabla mu = g(id + O) b, rho = (id - O) b."""
    A = md.algebroid
    d, r = A.chart.dim, A.rank
    names = A.names
    N = cov_dual(A, md.connection, md.mu)
    pts = np.atleast_2d(points)
    Nv = Tape([N[a][i] for a in range(r) for i in range(d)], names).eval(pts).reshape(-1, r, d)
    Rv = Tape([as_expr(A.rho[a][i]) for a in range(r) for i in range(d)], names).eval(pts)
    Rv = Rv.reshape(-1, r, d)
    gv = Tape([as_expr(v) for row in gd.g for v in row], names).eval(pts).reshape(-1, d, d)
    Ov = Tape([as_expr(v) for row in gd.O for v in row], names).eval(pts).reshape(-1, d, d)
    I = np.eye(d)
    worst, wp = 0.0, None
    for k in range(len(pts)):
        M = np.vstack([gv[k] @ (I + Ov[k]), I - Ov[k]])
        for a in range(r):
            rhs = np.concatenate([Nv[k, a], Rv[k, a]])
            b, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            res = float(np.abs(M @ b - rhs).max())
            if res > worst or wp is None:
                worst, wp = max(worst, res), [float(v) for v in pts[k]]
    return from_value(f"{prefix}.bou12_parametrization", "Dirac parametrization solve", worst,
                      tol, len(pts), worst=wp)
