"""Hash-consed expression DAG with exact symbolic differentiation.

Nodes are interned, so two structurally identical expressions are the same
Python object and ``a is b`` is structural equality.  Two families of
constructors exist:

* ``Expr.raw(...)`` builds a node verbatim (used by the parser, so the tree
  mirrors the source text);
* ``add``/``sub``/``mul``/``div``/``neg``/``power``/``call`` (and the Python
  operators) fold constants and drop neutral elements.  Nothing else is
  simplified; there is no reordering or collection of like terms.
"""
from __future__ import annotations

import math
from numbers import Real

FUNCS = ("sin", "cos", "exp", "sqrt")

# opcode names; the tape compiler keys off these strings
CONST, VAR, ADD, SUB, MUL, DIV, NEG, POW, CALL = (
    "const", "var", "add", "sub", "mul", "div", "neg", "pow", "call")

_TABLE: dict = {}


class Expr:
    __slots__ = ("op", "args", "payload", "_d", "__weakref__")

    def __init__(self, op, args, payload):
        self.op = op
        self.args = args
        self.payload = payload
        self._d = None

    @staticmethod
    def raw(op: str, args: tuple = (), payload=None) -> "Expr":
        if op == CONST:
            payload = float(payload)
            # keep -0.0 and 0.0 apart so printing stays faithful
            key = (op, (payload, math.copysign(1.0, payload)), ())
        else:
            key = (op, payload, tuple(id(a) for a in args))
        node = _TABLE.get(key)
        if node is None:
            node = Expr(op, tuple(args), payload)
            _TABLE[key] = node
        return node

    # --- predicates -------------------------------------------------------
    def is_const(self, value=None) -> bool:
        if self.op != CONST:
            return False
        return value is None or self.payload == value

    @property
    def is_zero(self) -> bool:
        return self.op == CONST and self.payload == 0.0

    # --- operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def __str__(self):
        return to_string(self)

    # --- traversal --------------------------------------------------------
    def variables(self) -> set:
        out = set()
        seen = set()
        stack = [self]
        while stack:
            n = stack.pop()
            if id(n) in seen:
                continue
            seen.add(id(n))
            if n.op == VAR:
                out.add(n.payload)
            stack.extend(n.args)
        return out


def const(v) -> Expr:
    return Expr.raw(CONST, (), float(v))


def var(name: str) -> Expr:
    return Expr.raw(VAR, (), name)


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (Real, int, float)):
        return const(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def add(a: Expr, b: Expr) -> Expr:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.op == CONST and b.op == CONST:
        return const(a.payload + b.payload)
    if b.op == NEG:
        return sub(a, b.args[0])
    return Expr.raw(ADD, (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if b.is_zero:
        return a
    if a is b:
        return ZERO
    if a.is_zero:
        return neg(b)
    if a.op == CONST and b.op == CONST:
        return const(a.payload - b.payload)
    if b.op == NEG:
        return add(a, b.args[0])
    return Expr.raw(SUB, (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_zero or b.is_zero:
        return ZERO
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    if a.op == CONST and b.op == CONST:
        return const(a.payload * b.payload)
    if a.is_const(-1.0):
        return neg(b)
    if b.is_const(-1.0):
        return neg(a)
    return Expr.raw(MUL, (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if b.is_zero:
        # keep the node so evaluation reports the pole where it happens
        return Expr.raw(DIV, (a, b))
    if a.is_zero:
        return ZERO
    if b.is_const(1.0):
        return a
    if a.op == CONST and b.op == CONST:
        return const(a.payload / b.payload)
    return Expr.raw(DIV, (a, b))


def neg(a: Expr) -> Expr:
    if a.op == CONST:
        return const(-a.payload) if a.payload != 0.0 else ZERO
    if a.op == NEG:
        return a.args[0]
    return Expr.raw(NEG, (a,))


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.op == CONST and (n > 0 or a.payload != 0.0):
        return const(a.payload ** n)
    return Expr.raw(POW, (a,), int(n))


def call(fn: str, a: Expr) -> Expr:
    if fn not in FUNCS:
        raise ValueError(f"unknown function {fn!r}")
    if a.op == CONST:
        x = a.payload
        if fn == "sqrt" and x < 0:
            return Expr.raw(CALL, (a,), fn)
        return const(getattr(math, fn)(x))
    return Expr.raw(CALL, (a,), fn)


def sin(a):
    return call("sin", as_expr(a))


def cos(a):
    return call("cos", as_expr(a))


def exp(a):
    return call("exp", as_expr(a))


def sqrt(a):
    return call("sqrt", as_expr(a))


def esum(items) -> Expr:
    """Left fold of ``add`` over an iterable, starting from zero."""
    acc = ZERO
    for it in items:
        acc = add(acc, as_expr(it))
    return acc


# --- differentiation ------------------------------------------------------

def diff(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``name``.

    Results are cached on the node.
    """
    d = e._d
    if d is None:
        d = e._d = {}
    hit = d.get(name)
    if hit is not None:
        return hit
    if name not in _vars_cached(e):
        res = ZERO
    else:
        res = _diff(e, name)
    d[name] = res
    return res


_VARCACHE: dict = {}


def _vars_cached(e: Expr) -> frozenset:
    v = _VARCACHE.get(id(e))
    if v is not None and v[0] is e:
        return v[1]
    if e.op == VAR:
        out = frozenset((e.payload,))
    elif e.op == CONST:
        out = frozenset()
    else:
        out = frozenset().union(*(_vars_cached(a) for a in e.args))
    _VARCACHE[id(e)] = (e, out)
    return out


def _diff(e: Expr, name: str) -> Expr:
    op = e.op
    if op == VAR:
        return ONE if e.payload == name else ZERO
    if op == CONST:
        return ZERO
    if op == ADD:
        return add(diff(e.args[0], name), diff(e.args[1], name))
    if op == SUB:
        return sub(diff(e.args[0], name), diff(e.args[1], name))
    if op == NEG:
        return neg(diff(e.args[0], name))
    if op == MUL:
        a, b = e.args
        return add(mul(diff(a, name), b), mul(a, diff(b, name)))
    if op == DIV:
        a, b = e.args
        da, db = diff(a, name), diff(b, name)
        t1 = div(da, b)
        if db.is_zero:
            return t1
        return sub(t1, div(mul(a, db), power(b, 2)))
    if op == POW:
        a = e.args[0]
        n = e.payload
        return mul(mul(const(n), power(a, n - 1)), diff(a, name))
    if op == CALL:
        a = e.args[0]
        da = diff(a, name)
        fn = e.payload
        if fn == "sin":
            return mul(call("cos", a), da)
        if fn == "cos":
            return neg(mul(call("sin", a), da))
        if fn == "exp":
            return mul(e, da)
        if fn == "sqrt":
            return div(da, mul(const(2.0), e))
    raise ValueError(f"cannot differentiate op {op!r}")


def substitute(e: Expr, mapping: dict) -> Expr:
    """Replace variables by expressions (simplifying constructors)."""
    memo: dict = {}

    def go(n):
        hit = memo.get(id(n))
        if hit is not None:
            return hit
        op = n.op
        if op == VAR:
            r = mapping.get(n.payload, n)
        elif op == CONST:
            r = n
        else:
            args = [go(a) for a in n.args]
            if op == ADD:
                r = add(*args)
            elif op == SUB:
                r = sub(*args)
            elif op == MUL:
                r = mul(*args)
            elif op == DIV:
                r = div(*args)
            elif op == NEG:
                r = neg(args[0])
            elif op == POW:
                r = power(args[0], n.payload)
            else:
                r = call(n.payload, args[0])
        memo[id(n)] = r
        return r

    mapping = {k: as_expr(v) for k, v in mapping.items()}
    return go(e)


# --- printing ---------------------------------------------------------------
# precedence levels mirror the grammar: expr < term < factor < base

_LEVEL = {ADD: 0, SUB: 0, MUL: 1, DIV: 1, POW: 2}


def _fmt_number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        s = str(int(x))
    else:
        s = repr(x)
    if s in ("inf", "-inf", "nan"):
        raise ValueError("non-finite constant cannot be printed")
    return s


def to_string(e: Expr) -> str:
    memo: dict = {}

    def base(n):
        # something usable as a grammar "base"
        s = go(n)
        if n.op in (ADD, SUB, MUL, DIV, POW):
            return f"({s})"
        if n.op == CONST and (n.payload < 0 or math.copysign(1.0, n.payload) < 0):
            return f"({s})"
        return s

    def factor(n):
        s = go(n)
        if n.op in (ADD, SUB, MUL, DIV):
            return f"({s})"
        if n.op == CONST and math.copysign(1.0, n.payload) < 0:
            return f"({s})"
        return s

    def term(n):
        s = go(n)
        if n.op in (ADD, SUB):
            return f"({s})"
        if n.op == CONST and math.copysign(1.0, n.payload) < 0:
            return f"({s})"
        return s

    def go(n):
        hit = memo.get(id(n))
        if hit is not None:
            return hit
        op = n.op
        if op == CONST:
            x = n.payload
            s = "-" + _fmt_number(-x) if math.copysign(1.0, x) < 0 else _fmt_number(x)
        elif op == VAR:
            s = n.payload
        elif op == ADD:
            s = f"{go(n.args[0])} + {term(n.args[1])}"
        elif op == SUB:
            s = f"{go(n.args[0])} - {term(n.args[1])}"
        elif op == MUL:
            s = f"{term(n.args[0])}*{factor(n.args[1])}"
        elif op == DIV:
            s = f"{term(n.args[0])}/{factor(n.args[1])}"
        elif op == NEG:
            s = "-" + base(n.args[0])
        elif op == POW:
            s = f"{base(n.args[0])}^{n.payload}"
        elif op == CALL:
            s = f"{n.payload}({go(n.args[0])})"
        else:
            raise ValueError(op)
        memo[id(n)] = s
        return s

    return go(e)
