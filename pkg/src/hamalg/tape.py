"""Compile expression DAGs into a flat instruction tape and evaluate it in batch.

Two interchangeable backends run a tape:

* ``_tape_kernel`` (Cython, built as an optional extension) loops over points
  and instructions in C;
* a numpy fallback evaluates one instruction at a time, vectorized over points.

The compiled kernel is used when importable.  Setting ``HAMALG_BACKEND=python``
forces the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .expr import ADD, CALL, CONST, DIV, MUL, NEG, POW, SUB, VAR, Expr, as_expr, diff

OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_NEG, OP_POW = range(8)
OP_SIN, OP_COS, OP_EXP, OP_SQRT = 8, 9, 10, 11
_BINOP = {ADD: OP_ADD, SUB: OP_SUB, MUL: OP_MUL, DIV: OP_DIV}
_FUNOP = {"sin": OP_SIN, "cos": OP_COS, "exp": OP_EXP, "sqrt": OP_SQRT}


class DomainError(ArithmeticError):
    """Division by zero or square root of a negative number."""

    def __init__(self, msg, point=None):
        self.point = None if point is None else tuple(float(v) for v in point)
        super().__init__(msg if point is None else f"{msg} at point {self.point}")


try:
    if os.environ.get("HAMALG_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced")
    from . import _tape_kernel as _kernel  # type: ignore
    BACKEND = "cython"
except ImportError:
    _kernel = None
    BACKEND = "python"


class Tape:
    """A straight-line program computing several outputs from named inputs."""

    def __init__(self, outputs, var_names):
        self.var_names = list(var_names)
        col = {n: k for k, n in enumerate(self.var_names)}
        ops, a0, a1, ip, fp = [], [], [], [], []
        slot: dict = {}

        def emit(op, x=0, y=0, i=0, f=0.0):
            ops.append(op)
            a0.append(x)
            a1.append(y)
            ip.append(i)
            fp.append(f)
            return len(ops) - 1

        # iterative post-order walk; the DAG can be deep for long sums
        out_idx = []
        for root in outputs:
            root = as_expr(root)
            stack = [(root, False)]
            while stack:
                n, ready = stack.pop()
                if id(n) in slot:
                    continue
                if not ready and n.args:
                    stack.append((n, True))
                    for a in n.args:
                        if id(a) not in slot:
                            stack.append((a, False))
                    continue
                op = n.op
                if op == CONST:
                    k = emit(OP_CONST, f=n.payload)
                elif op == VAR:
                    if n.payload not in col:
                        raise KeyError(f"variable {n.payload!r} is not a tape input")
                    k = emit(OP_VAR, i=col[n.payload])
                elif op in _BINOP:
                    k = emit(_BINOP[op], slot[id(n.args[0])], slot[id(n.args[1])])
                elif op == NEG:
                    k = emit(OP_NEG, slot[id(n.args[0])])
                elif op == POW:
                    k = emit(OP_POW, slot[id(n.args[0])], i=n.payload)
                elif op == CALL:
                    k = emit(_FUNOP[n.payload], slot[id(n.args[0])])
                else:
                    raise ValueError(op)
                slot[id(n)] = k
            out_idx.append(slot[id(root)])
        self._keep = list(outputs)  # slot keys are ids; keep nodes alive
        self.ops = np.asarray(ops, dtype=np.int32)
        self.a0 = np.asarray(a0, dtype=np.int32)
        self.a1 = np.asarray(a1, dtype=np.int32)
        self.ip = np.asarray(ip, dtype=np.int32)
        self.fp = np.asarray(fp, dtype=np.float64)
        self.outs = np.asarray(out_idx, dtype=np.int32)

    def __len__(self):
        return len(self.ops)

    def eval(self, points, backend=None) -> np.ndarray:
        """Evaluate at ``points`` of shape (n, nvars); returns (n, nouts)."""
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
        if pts.shape[1] != len(self.var_names):
            raise ValueError(f"expected {len(self.var_names)} coordinates, got {pts.shape[1]}")
        backend = backend or BACKEND
        if backend == "cython" and _kernel is not None:
            res = np.empty((pts.shape[0], len(self.outs)), dtype=np.float64)
            regs = np.empty((max(len(self.ops), 1), _kernel.block_size()), dtype=np.float64)
            code, bad = _kernel.run_tape(self.ops, self.a0, self.a1, self.ip, self.fp,
                                         pts, self.outs, res, regs)
            if code:
                raise DomainError(_MSG[code], pts[bad])
            return res
        return _run_numpy(self, pts)


_MSG = {1: "division by zero", 2: "square root of a negative number"}


def _ipow(x, n):
    # binary exponentiation; same multiplication order as the C kernel
    if n < 0:
        return 1.0 / _ipow(x, -n)
    result = np.ones_like(x)
    base = x
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _run_numpy(tape: Tape, pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    regs = [None] * len(tape.ops)
    ops, a0, a1, ip, fp = (tape.ops.tolist(), tape.a0.tolist(), tape.a1.tolist(),
                           tape.ip.tolist(), tape.fp.tolist())
    for k, op in enumerate(ops):
        if op == OP_CONST:
            r = np.full(n, fp[k])
        elif op == OP_VAR:
            r = pts[:, ip[k]]
        elif op == OP_ADD:
            r = regs[a0[k]] + regs[a1[k]]
        elif op == OP_SUB:
            r = regs[a0[k]] - regs[a1[k]]
        elif op == OP_MUL:
            r = regs[a0[k]] * regs[a1[k]]
        elif op == OP_DIV:
            den = regs[a1[k]]
            bad = np.flatnonzero(den == 0.0)
            if bad.size:
                raise DomainError(_MSG[1], pts[bad[0]])
            r = regs[a0[k]] / den
        elif op == OP_NEG:
            r = -regs[a0[k]]
        elif op == OP_POW:
            base = regs[a0[k]]
            if ip[k] < 0:
                bad = np.flatnonzero(base == 0.0)
                if bad.size:
                    raise DomainError(_MSG[1], pts[bad[0]])
            r = _ipow(base, ip[k])
        elif op == OP_SIN:
            r = np.sin(regs[a0[k]])
        elif op == OP_COS:
            r = np.cos(regs[a0[k]])
        elif op == OP_EXP:
            r = np.exp(regs[a0[k]])
        elif op == OP_SQRT:
            arg = regs[a0[k]]
            bad = np.flatnonzero(arg < 0.0)
            if bad.size:
                raise DomainError(_MSG[2], pts[bad[0]])
            r = np.sqrt(arg)
        else:
            raise ValueError(op)
        regs[k] = r
    out = np.empty((n, len(tape.outs)))
    for j, k in enumerate(tape.outs.tolist()):
        out[:, j] = regs[k]
    return out


def evaluate(exprs, var_names, points, backend=None) -> np.ndarray:
    """One-shot helper: compile ``exprs`` and evaluate at ``points``."""
    return Tape(list(exprs), var_names).eval(points, backend=backend)


@dataclass(frozen=True)
class Jet:
    value: float
    grad: np.ndarray
    hess: np.ndarray


def default_names(d):
    return [f"x{i + 1}" for i in range(d)]


def eval_jet(e: Expr, point, chart=None) -> Jet:
    """Value, gradient and Hessian of ``e`` at ``point`` from exact derivatives."""
    point = np.asarray(point, dtype=np.float64).ravel()
    d = point.size
    if chart is None:
        names = default_names(d)
    elif hasattr(chart, "coord_names"):
        names = list(chart.coord_names)
    else:
        names = list(chart)
    e = as_expr(e)
    grads = [diff(e, n) for n in names]
    upper = [(i, j) for i in range(d) for j in range(i, d)]
    hs = [diff(grads[i], names[j]) for i, j in upper]
    vals = Tape([e] + grads + hs, names).eval(point[None, :])[0]
    hess = np.zeros((d, d))
    for (i, j), v in zip(upper, vals[1 + d:]):
        hess[i, j] = hess[j, i] = v
    return Jet(float(vals[0]), vals[1:1 + d].copy(), hess)
