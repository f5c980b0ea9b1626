import itertools

import numpy as np
import pytest

from hamalg.algebroid import ConnectionData, LieAlgebroidData
from hamalg.checks import sample_points
from hamalg.fields import Chart, multivector
from hamalg.parser import parse_expr


def eps(i, j, k):
    return (i - j) * (j - k) * (k - i) / 2


def rand_poly_src(rng, names, degree=2, terms=4, lo=-3, hi=3):
    """Random integer-coefficient polynomial as source text."""
    out = [str(int(rng.integers(lo, hi + 1)))]
    for _ in range(terms):
        c = int(rng.integers(lo, hi + 1))
        if c == 0:
            continue
        k = int(rng.integers(1, degree + 1))
        mono = "*".join(names[int(rng.integers(0, len(names)))] for _ in range(k))
        out.append(f"({c})*{mono}")
    return " + ".join(out)


def rand_poly(rng, chart, **kw):
    return parse_expr(rand_poly_src(rng, list(chart.coord_names), **kw), chart)


def so3_algebroid():
    """Coadjoint action algebroid with the first-slot anchor used in so3_coadjoint."""
    ch = Chart(3)
    x = ch.coord_names
    rho = [[parse_expr(" + ".join(f"({eps(i, a, k)})*{x[k]}" for k in range(3)), ch)
            for i in range(3)] for a in range(3)]
    C = [[[-eps(a, b, c) for c in range(3)] for b in range(3)] for a in range(3)]
    return LieAlgebroidData(ch, 3, rho, C)


def so3_pi(ch):
    Q = lambda s: parse_expr(s, ch)
    return multivector(ch, 2, {(0, 1): Q("x3"), (0, 2): Q("-x2"), (1, 2): Q("x1")})


def random_connection(rng, chart, rank):
    return ConnectionData([[[rand_poly(rng, chart, degree=1, terms=2) for _ in range(chart.dim)]
                            for _ in range(rank)] for _ in range(rank)])


def all_pairs(n):
    return list(itertools.product(range(n), repeat=2))


@pytest.fixture
def so3():
    return so3_algebroid()


@pytest.fixture
def pts3():
    return sample_points(3, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def mutate_mu(md, rng, k):
    """k-th random momentum mutation: alternately a constant shift, a polynomial
    perturbation or a rescaling of mu."""
    from hamalg.expr import add, const, mul
    ch = md.algebroid.chart
    kind = k % 3
    if kind == 0:
        mu = [add(m, const(float(rng.integers(-3, 4)))) for m in md.mu]
    elif kind == 1:
        mu = [add(m, mul(const(0.5), rand_poly(rng, ch, degree=2, terms=2))) for m in md.mu]
    else:
        mu = [mul(const(float(rng.choice([-1.0, 0.5, 2.0]))), m) for m in md.mu]
    return md.with_mu(mu)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
