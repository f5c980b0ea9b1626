"""Scenario files: loading, validation and construction of the geometric data.

A scenario is a TOML document.  Expressions are strings in the field
grammar; component keys are comma separated 1-based index lists, so
``"1,2" = "x3"`` sets the (1, 2) component.  The machine-readable layout is
shipped as ``schema/scenario.schema.json``.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .algebroid import ConnectionData, LieAlgebroidData
from .courant import CourantStructure
from .expr import Expr
from .fields import Chart, TensorField, form, multivector, one_form, scalar, vector
from .momentum import LITERAL, GRAPH, Geometry, MomentumData
from .parser import ExprSyntaxError, UnknownIdentifierError, parse_expr
from .sigma import GDSMAlgebraicData

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

FORMAT_VERSION = 1
GEOMETRY_KINDS = ("presymplectic", "poisson", "quasi_poisson", "gdsm")
FIELD_TYPES = ("scalar", "vector", "covector", "form", "multivector")


class ScenarioError(ValueError):
    """Invalid scenario; ``str()`` carries ``file:line: key: message``."""

    def __init__(self, message, path=None, line=None, key=None):
        self.message = message
        self.path = path
        self.line = line
        self.key = key
        loc = str(path) if path is not None else "<scenario>"
        if line is not None:
            loc += f":{line}"
        where = f" {key}:" if key else ""
        super().__init__(f"{loc}:{where} {message}")


@dataclass
class Scenario:
    name: str
    description: str
    chart: Chart
    fields: dict
    algebroid: LieAlgebroidData
    connection: ConnectionData
    mu: list | None = None
    sign: int = LITERAL
    action: bool = False
    geometry: Geometry | None = None
    gdsm: GDSMAlgebraicData | None = None
    akz_pi: TensorField | None = None
    sigma: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    path: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.chart.dim

    @property
    def rank(self):
        return self.algebroid.rank

    def momentum_data(self, mu=None) -> MomentumData | None:
        mu = self.mu if mu is None else mu
        if mu is None or self.geometry is None:
            return None
        return MomentumData(self.algebroid, self.connection, mu, self.geometry, self.sign,
                            self.action, meta={"scenario": self.name})

    @property
    def bivector(self) -> TensorField | None:
        """The bivector used by the graded and sigma-model suites."""
        if self.akz_pi is not None:
            return self.akz_pi
        if self.geometry is not None and self.geometry.kind in ("poisson", "quasi_poisson"):
            return self.geometry.pi
        return None


# --- locating errors --------------------------------------------------------

_HEADER = re.compile(r"^\s*\[+\s*([^\]]+?)\s*\]+\s*(#.*)?$")


def _locate(text: str, table: str, needles=()):
    """Best-effort 1-based line of ``needles`` inside ``[table]`` (or anywhere)."""
    if text is None:
        return None
    lines = text.splitlines()
    start, end = None, len(lines)
    for k, ln in enumerate(lines):
        m = _HEADER.match(ln)
        if not m:
            continue
        if start is not None:
            end = k
            break
        if m.group(1).replace('"', "") == table:
            start = k
    spans = [(start, end)] if start is not None else []
    spans.append((0, len(lines)))
    for lo, hi in spans:
        for nd in needles:
            if nd is None:
                continue
            pats = [f'"{nd}"', f"'{nd}'", nd]
            for k in range(lo, hi):
                if any(p in lines[k] for p in pats):
                    return k + 1
    return start + 1 if start is not None else None


class _Ctx:
    def __init__(self, path, text):
        self.path = path
        self.text = text

    def fail(self, message, table, key=None, needles=()):
        line = _locate(self.text, table, tuple(needles) + ((key.split(".")[-1],) if key else ()))
        raise ScenarioError(message, self.path, line, key)


# --- parsing helpers -------------------------------------------------------------------

def _expr(ctx, src, chart, table, key) -> Expr:
    if isinstance(src, bool) or not isinstance(src, (str, int, float)):
        ctx.fail(f"expected an expression string, got {type(src).__name__}", table, key)
    s = str(src)
    try:
        return parse_expr(s, chart)
    except UnknownIdentifierError as exc:
        ctx.fail(f"dangling reference: unknown identifier {exc.name!r} in {s!r}", table, key,
                 needles=(s,))
    except ExprSyntaxError as exc:
        ctx.fail(f"cannot parse expression {s!r}: {exc}", table, key, needles=(s,))


def _index_key(ctx, k, n, bound, table, key):
    try:
        idx = tuple(int(p) - 1 for p in str(k).split(","))
    except ValueError:
        ctx.fail(f"bad index key {k!r} (expected comma separated integers)", table, key,
                 needles=(str(k),))
    if len(idx) != n or any(not 0 <= i < b for i, b in zip(idx, bound)):
        ctx.fail(f"index key {k!r} out of range (need {n} indices, bounds {list(bound)})",
                 table, key, needles=(str(k),))
    return idx


def _matrix(ctx, rows, nrows, ncols, chart, table, key):
    if not isinstance(rows, list) or len(rows) != nrows:
        ctx.fail(f"dimension mismatch: expected {nrows} rows", table, key)
    out = []
    for a, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != ncols:
            ctx.fail(f"dimension mismatch: row {a + 1} needs {ncols} entries", table, key)
        out.append([_expr(ctx, v, chart, table, key) for v in row])
    return out


def _require(ctx, data, name, table, types):
    if name not in data:
        ctx.fail(f"missing required key {name!r}", table, f"{table}.{name}")
    v = data[name]
    if not isinstance(v, types) or isinstance(v, bool) and bool not in _tuple(types):
        ctx.fail(f"{name!r} has the wrong type", table, f"{table}.{name}")
    return v


def _tuple(t):
    return t if isinstance(t, tuple) else (t,)


# --- blocks ------------------------------------------------------------------------------

def _chart(ctx, data):
    blk = data.get("chart")
    if not isinstance(blk, dict):
        ctx.fail("missing [chart] table", "chart", "chart")
    dim = _require(ctx, blk, "dim", "chart", int)
    names = blk.get("names")
    if names is not None and (not isinstance(names, list) or len(names) != dim):
        ctx.fail(f"dimension mismatch: {dim} coordinate names needed", "chart", "chart.names")
    try:
        return Chart(dim, tuple(names or ()))
    except ValueError as exc:
        ctx.fail(str(exc), "chart", "chart")


def _field(ctx, chart, name, spec):
    table = f"fields.{name}"
    if not isinstance(spec, dict):
        ctx.fail("field must be a table", table, table)
    kind = spec.get("type")
    if kind not in FIELD_TYPES:
        ctx.fail(f"unknown field type {kind!r} (expected one of {', '.join(FIELD_TYPES)})",
                 table, f"{table}.type")
    comps = spec.get("components")
    key = f"{table}.components"
    d = chart.dim
    if kind == "scalar":
        return scalar(chart, _expr(ctx, comps, chart, table, key))
    if kind in ("vector", "covector"):
        if not isinstance(comps, list) or len(comps) != d:
            ctx.fail(f"dimension mismatch: {kind} needs {d} components", table, key)
        vals = [_expr(ctx, v, chart, table, key) for v in comps]
        return vector(chart, vals) if kind == "vector" else one_form(chart, vals)
    deg = _require(ctx, spec, "degree", table, int)
    if not 1 <= deg <= d:
        ctx.fail(f"degree {deg} out of range for dim {d}", table, f"{table}.degree")
    if not isinstance(comps, dict):
        ctx.fail("components must be a table of index keys", table, key)
    out = {}
    for k, v in comps.items():
        idx = _index_key(ctx, k, deg, [d] * deg, table, key)
        if len(set(idx)) != len(idx):
            ctx.fail(f"repeated index in {k!r}", table, key, needles=(k,))
        out[idx] = _expr(ctx, v, chart, table, key)
    try:
        return form(chart, deg, out) if kind == "form" else multivector(chart, deg, out)
    except ValueError as exc:
        ctx.fail(str(exc), table, key)


def _ref(ctx, fields, blk, name, table, want_up, want_down, required=True):
    ref = blk.get(name)
    if ref is None:
        if required:
            ctx.fail(f"missing reference {name!r}", table, f"{table}.{name}")
        return None
    if ref not in fields:
        ctx.fail(f"dangling reference: field {ref!r} is not declared", table, f"{table}.{name}",
                 needles=(ref,))
    f = fields[ref]
    if (f.up, f.down) != (want_up, want_down):
        ctx.fail(f"field {ref!r} has the wrong index signature for {name!r}", table,
                 f"{table}.{name}", needles=(ref,))
    return f


def _algebroid(ctx, chart, data):
    blk = data.get("algebroid")
    if not isinstance(blk, dict):
        ctx.fail("missing [algebroid] table", "algebroid", "algebroid")
    r = _require(ctx, blk, "rank", "algebroid", int)
    if r < 1:
        ctx.fail("rank must be at least 1", "algebroid", "algebroid.rank")
    rho = _matrix(ctx, blk.get("rho"), r, chart.dim, chart, "algebroid", "algebroid.rho")
    c = {}
    for k, v in (blk.get("c") or {}).items():
        a, b, cc = _index_key(ctx, k, 3, [r] * 3, "algebroid", "algebroid.c")
        c[(cc, a, b)] = _expr(ctx, v, chart, "algebroid", "algebroid.c")
    try:
        return LieAlgebroidData(chart, r, rho, c)
    except ValueError as exc:
        ctx.fail(str(exc), "algebroid", "algebroid")


def _connection(ctx, chart, r, data):
    blk = data.get("connection", {"kind": "trivial"})
    if blk.get("kind", "coefficients") == "trivial":
        return ConnectionData.trivial(r, chart.dim)
    om = [[[parse_expr("0")] * chart.dim for _ in range(r)] for _ in range(r)]
    for k, v in (blk.get("omega") or {}).items():
        b, a, i = _index_key(ctx, k, 3, [r, r, chart.dim], "connection", "connection.omega")
        om[b][a][i] = _expr(ctx, v, chart, "connection", "connection.omega")
    return ConnectionData(om)


def _constants(ctx, blk, name, n, table):
    out = {}
    for k, v in (blk.get(name) or {}).items():
        idx = _index_key(ctx, k, 3, [n] * 3, table, f"{table}.{name}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            ctx.fail("structure constants must be numbers", table, f"{table}.{name}")
        out[idx] = float(v)
    return out


def _geometry(ctx, chart, fields, A, data):
    blk = data.get("geometry")
    if blk is None:
        return None, None
    kind = blk.get("kind")
    if kind not in GEOMETRY_KINDS:
        ctx.fail(f"unknown geometry kind {kind!r}", "geometry", "geometry.kind")
    H = _ref(ctx, fields, blk, "H", "geometry", 0, 3, required=False)
    if kind == "presymplectic":
        return Geometry(kind, omega=_ref(ctx, fields, blk, "omega", "geometry", 0, 2), H=H), None
    if kind == "poisson":
        return Geometry(kind, pi=_ref(ctx, fields, blk, "pi", "geometry", 2, 0), H=H), None
    if kind == "quasi_poisson":
        pi = _ref(ctx, fields, blk, "pi", "geometry", 2, 0)
        rg = blk.get("rho_g", "anchor")
        if rg == "anchor":
            rho_g = [list(row) for row in A.rho]
        else:
            n = len(rg) if isinstance(rg, list) else 0
            rho_g = _matrix(ctx, rg, n, chart.dim, chart, "geometry", "geometry.rho_g")
        n = len(rho_g)
        lc = _constants(ctx, blk, "lie_c", n, "geometry")
        lie_c = [[[0.0] * n for _ in range(n)] for _ in range(n)]
        for (a, b, c), v in lc.items():
            lie_c[c][a][b] = v
            lie_c[c][b][a] = -v
        phi = _constants(ctx, blk, "phi", n, "geometry")
        return Geometry(kind, pi=pi, H=H, rho_g=rho_g, lie_c=lie_c, phi=phi), None
    d = chart.dim
    g = _matrix(ctx, blk.get("g"), d, d, chart, "geometry", "geometry.g")
    O = _matrix(ctx, blk.get("O"), d, d, chart, "geometry", "geometry.O")
    gd = GDSMAlgebraicData(chart, g, O)
    try:
        U = gd.U_field()
    except ZeroDivisionError as exc:
        ctx.fail(f"id + O is singular: {exc}", "geometry", "geometry.O")
    return Geometry("poisson", pi=U, H=H), gd


_CHECK_DEFAULTS = {"tol": 1e-9, "samples": 64, "seed": 42, "box": [-2.0, 2.0],
                   "order_threshold": 0.9, "tolerances": {}}
_SIGMA_DEFAULTS = {"grid": [8, 16, 32], "seed": 7, "boundary_grid": [8, 16, 32],
                   "flat_vs_covariant_configs": 10}


def _options(ctx, data, name, defaults):
    blk = data.get(name) or {}
    out = {k: (dict(v) if isinstance(v, dict) else list(v) if isinstance(v, list) else v)
           for k, v in defaults.items()}
    for k, v in blk.items():
        if k not in out:
            ctx.fail(f"unknown option {k!r}", name, f"{name}.{k}")
        out[k] = v
    return out


_TOP_LEVEL = {"format_version", "name", "description", "chart", "fields", "algebroid",
              "connection", "momentum", "geometry", "akz", "sigma", "checks"}


def build_scenario(data: dict, path=None, text=None) -> Scenario:
    """Validate a parsed scenario mapping and construct the geometric objects."""
    ctx = _Ctx(path, text)
    for k in data:
        if k not in _TOP_LEVEL:
            ctx.fail(f"unknown top-level key {k!r}", "", k)
    ver = data.get("format_version", FORMAT_VERSION)
    if ver != FORMAT_VERSION:
        ctx.fail(f"unsupported format_version {ver!r}", "", "format_version")
    name = data.get("name") or (Path(path).stem if path else "scenario")
    chart = _chart(ctx, data)
    fields = {}
    for fname, spec in (data.get("fields") or {}).items():
        fields[fname] = _field(ctx, chart, fname, spec)
    A = _algebroid(ctx, chart, data)
    conn = _connection(ctx, chart, A.rank, data)
    mu, sign, action = None, LITERAL, False
    mblk = data.get("momentum")
    if mblk is not None:
        if not isinstance(mblk.get("mu"), list) or len(mblk["mu"]) != A.rank:
            ctx.fail(f"dimension mismatch: mu needs {A.rank} components", "momentum",
                     "momentum.mu")
        mu = [_expr(ctx, v, chart, "momentum", "momentum.mu") for v in mblk["mu"]]
        conv = mblk.get("convention", "literal")
        if conv not in ("literal", "graph"):
            ctx.fail(f"unknown convention {conv!r}", "momentum", "momentum.convention")
        sign = LITERAL if conv == "literal" else GRAPH
        action = bool(mblk.get("action", False))
    geometry, gd = _geometry(ctx, chart, fields, A, data)
    if gd is not None and mu is not None:
        gd.mu = mu
    akz = data.get("akz") or {}
    akz_pi = _ref(ctx, fields, akz, "pi", "akz", 2, 0, required=False)
    checks = _options(ctx, data, "checks", _CHECK_DEFAULTS)
    sigma = _options(ctx, data, "sigma", _SIGMA_DEFAULTS)
    return Scenario(name=name, description=data.get("description", ""), chart=chart,
                    fields=fields, algebroid=A, connection=conn, mu=mu, sign=sign,
                    action=action, geometry=geometry, gdsm=gd, akz_pi=akz_pi, sigma=sigma,
                    checks=checks, path=str(path) if path else None, raw=data)


def loads_scenario(text: str, path=None) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"parse error: {exc}", path, int(m.group(1)) if m else None) from None
    return build_scenario(data, path, text)


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_path(str(path))
        if bundled is None:
            raise ScenarioError("file not found", path)
        p = bundled
    return loads_scenario(p.read_text(encoding="utf-8"), p)


def bundled_names():
    root = resources.files("hamalg") / "scenarios"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".toml"))


def bundled_path(name: str):
    root = resources.files("hamalg") / "scenarios"
    f = root / f"{name}.toml"
    return Path(str(f)) if f.is_file() else None


def expected_report_path(name: str):
    root = resources.files("hamalg") / "scenarios"
    f = root / f"{name}.expected.json"
    return Path(str(f)) if f.is_file() else None


def courant_of(sc: Scenario) -> CourantStructure:
    """Unsigned Courant algebroid the scenario geometry lives in."""
    from .courant import quasi_poisson, standard
    g = sc.geometry
    if g is not None and g.kind == "quasi_poisson":
        return quasi_poisson(sc.chart, len(g.rho_g), g.lie_c, g.phi, g.H)
    return standard(sc.chart, None if g is None else g.H)
