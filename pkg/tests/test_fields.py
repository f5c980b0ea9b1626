import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import rand_poly, rand_poly_src
from hamalg.checks import sample_points
from hamalg.expr import ADD, CONST, MUL, VAR, to_string
from hamalg.fields import (Chart, de_rham, form, interior_product, lie_derivative, multivector,
                           one_form, schouten, schouten_bracket, vector, wedge)
from hamalg.parser import ExprSyntaxError, UnknownIdentifierError, parse_expr
from hamalg.tape import DomainError, eval_jet, evaluate

CH2, CH3, CH4 = Chart(2), Chart(3), Chart(4)


def P(src, ch=CH3):
    return parse_expr(src, ch)


def vals(field, pts):
    return field.eval(pts)


# --- parser -------------------------------------------------------------------

def test_parse_shape():
    e = parse_expr("x1*x2 + 1", CH2)
    assert e.op == ADD
    assert e.args[0].op == MUL and [a.op for a in e.args[0].args] == [VAR, VAR]
    assert e.args[1].op == CONST and e.args[1].payload == 1.0


def test_pythagoras_identity():
    e = parse_expr("sin(x1)^2 + cos(x1)^2", CH2)
    out = evaluate([e], CH2.coord_names, sample_points(2, 32))
    assert np.max(np.abs(out - 1.0)) < 1e-12


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("x1*(", CH2)
    assert err.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as err:
        parse_expr("x1 + x3", CH2)
    assert err.value.name == "x3"


def test_unary_minus_binds_tighter_than_power():
    e = parse_expr("-x1^2", CH2)
    assert evaluate([e], CH2.coord_names, [[3.0, 0.0]])[0, 0] == 9.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_print_parse_round_trip(seed):
    rng = np.random.default_rng(seed)
    e = parse_expr(rand_poly_src(rng, ["x1", "x2", "x3"], degree=3, terms=5), CH3)
    again = parse_expr(to_string(e), CH3)
    pts = sample_points(3, 8)
    assert np.allclose(evaluate([e], CH3.coord_names, pts), evaluate([again], CH3.coord_names, pts),
                       rtol=0, atol=1e-12)
    assert to_string(again) == to_string(e)


# --- jets ---------------------------------------------------------------------

def test_jet_hand_values():
    j = eval_jet(parse_expr("x1^2*x2", CH2), (2, 3))
    assert j.value == 12
    assert np.array_equal(j.grad, [12, 4])
    assert np.array_equal(j.hess, [[6, 4], [4, 0]])


def test_jet_constant():
    j = eval_jet(parse_expr("5", CH2), (0.3, -1.2))
    assert j.value == 5 and not j.grad.any() and not j.hess.any()


def test_jet_pole():
    with pytest.raises(DomainError):
        eval_jet(parse_expr("1/x1", CH2), (0, 1))


def test_sqrt_negative_is_domain_error():
    with pytest.raises(DomainError):
        evaluate([parse_expr("sqrt(x1)", CH2)], CH2.coord_names, [[-1.0, 0.0]])


SMOOTH = ["sin(x1*x2) + exp(x3/3)", "x1^3*x2 - cos(x2 + x3)", "sqrt(4 + x1^2)*x3",
          "exp(x1)*sin(x2)*cos(x3)", "(x1 + 2*x2)/(5 + x3^2)"]


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SMOOTH), st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_jet_matches_central_differences(src, point):
    e = parse_expr(src, CH3)
    p = np.array(point)
    j = eval_jet(e, p)
    h = 1e-5
    f = lambda q: evaluate([e], CH3.coord_names, [q])[0, 0]
    fd = np.array([(f(p + h * np.eye(3)[i]) - f(p - h * np.eye(3)[i])) / (2 * h) for i in range(3)])
    scale = max(1.0, np.max(np.abs(j.grad)))
    assert np.max(np.abs(fd - j.grad)) / scale < 1e-6


def test_jet_against_sympy():
    x = sp.symbols("x1:4")
    pt = (0.4, -0.7, 1.1)
    for src in SMOOTH:
        e = parse_expr(src, CH3)
        s = sp.sympify(src.replace("^", "**"), locals=dict(zip(["x1", "x2", "x3"], x)))
        sub = dict(zip(x, pt))
        j = eval_jet(e, pt)
        assert abs(j.value - float(s.subs(sub))) < 1e-12
        g = [float(sp.diff(s, v).subs(sub)) for v in x]
        H = [[float(sp.diff(s, a, b).subs(sub)) for b in x] for a in x]
        assert np.allclose(j.grad, g, atol=1e-11)
        assert np.allclose(j.hess, H, atol=1e-10)


# --- storage ------------------------------------------------------------------

def test_antisymmetric_storage_signs():
    w = form(CH4, 3, {(2, 0, 3): P("x1", CH4)})
    assert list(w.comps) == [(0, 2, 3)]
    for perm in itertools.permutations((0, 2, 3)):
        # sign relative to the order the component was given in
        sign = round(np.linalg.det(np.eye(3)[[(2, 0, 3).index(i) for i in perm]]))
        got = evaluate([w[perm]], CH4.coord_names, [[2.0, 0, 0, 0]])[0, 0]
        assert got == sign * 2.0
    assert w[0, 0, 3].is_zero


def test_repeated_index_rejected():
    with pytest.raises(ValueError):
        multivector(CH3, 2, {(1, 1): 1})


# --- Schouten -----------------------------------------------------------------

def test_linear_poisson_is_poisson(pts3):
    pi = multivector(CH3, 2, {(0, 1): P("x3"), (1, 2): P("x1"), (2, 0): P("x2")})
    assert np.max(np.abs(vals(schouten(pi, pi), pts3))) < 1e-12


def test_constant_bivectors_commute():
    a = multivector(CH3, 2, {(0, 1): 2.0, (1, 2): -1.0})
    b = multivector(CH3, 2, {(0, 2): 3.0})
    assert not schouten(a, b).comps


def sympy_pipi(P_sym, x):
    """[pi, pi]^{ijk} = 2 * cyclic sum of pi^{il} d_l pi^{jk} (independent oracle)."""
    d = len(x)
    out = {}
    for i, j, k in itertools.combinations(range(d), 3):
        out[(i, j, k)] = 2 * sum(P_sym[a, l] * sp.diff(P_sym[b, c], x[l])
                                 for a, b, c in ((i, j, k), (j, k, i), (k, i, j)) for l in range(d))
    return out


def test_broken_bivector_nonzero_trivector():
    pi = multivector(CH3, 2, {(0, 1): P("x1"), (0, 2): P("x2"), (1, 2): P("1")})
    got = schouten_bracket(pi, pi, [1, 1, 1])
    x = sp.symbols("x1:4")
    M = sp.Matrix([[0, x[0], x[1]], [-x[0], 0, 1], [-x[1], -1, 0]])
    expect = sympy_pipi(M, x)[(0, 1, 2)].subs(dict(zip(x, (1, 1, 1))))
    assert got[0, 1, 2] == float(expect) == -2.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_schouten_square_matches_sympy(seed):
    rng = np.random.default_rng(seed)
    ch = CH4
    x = sp.symbols("x1:5")
    M = sp.zeros(4)
    comps = {}
    for i, j in itertools.combinations(range(4), 2):
        src = rand_poly_src(rng, list(ch.coord_names), degree=2, terms=2)
        comps[(i, j)] = parse_expr(src, ch)
        s = sp.sympify(src, locals=dict(zip(ch.coord_names, x)))
        M[i, j], M[j, i] = s, -s
    pi = multivector(ch, 2, comps)
    pt = rng.uniform(-1, 1, 4)
    got = schouten_bracket(pi, pi, pt)
    for key, v in sympy_pipi(M, x).items():
        assert abs(got[key] - float(v.subs(dict(zip(x, pt))))) < 1e-9


def rand_multivector(rng, ch, deg):
    if deg == 0:
        return _scalar(rng, ch)
    return multivector(ch, deg, {k: rand_poly(rng, ch, terms=2)
                                 for k in itertools.combinations(range(ch.dim), deg)})


def _scalar(rng, ch):
    from hamalg.fields import TensorField
    return TensorField(ch, 0, 0, {(): rand_poly(rng, ch)})


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2), st.integers(1, 2), st.integers(2, 4))
def test_schouten_graded_antisymmetry(seed, p, q, d):
    rng = np.random.default_rng(seed)
    ch = Chart(d)
    A, B = rand_multivector(rng, ch, p), rand_multivector(rng, ch, q)
    pts = sample_points(d, 16, seed=seed % 1000)
    lhs = schouten(A, B).eval(pts)
    rhs = -((-1) ** ((p - 1) * (q - 1))) * schouten(B, A).eval(pts)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4))
def test_schouten_graded_jacobi(seed, d):
    rng = np.random.default_rng(seed)
    ch = Chart(d)
    degs = [int(rng.integers(1, 3)) for _ in range(3)]
    A, B, C = (rand_multivector(rng, ch, k) for k in degs)
    a, b, c = (k - 1 for k in degs)
    pts = sample_points(d, 8, seed=seed % 997)
    # [A,[B,C]] = [[A,B],C] + (-1)^{ab} [B,[A,C]] in shifted degrees
    lhs = schouten(A, schouten(B, C)).eval(pts)
    rhs = schouten(schouten(A, B), C).eval(pts) + (-1) ** (a * b) * schouten(B, schouten(A, C)).eval(pts)
    assert np.max(np.abs(lhs - rhs)) < 1e-9 * max(1.0, np.max(np.abs(lhs)))


def test_function_slot_convention():
    from hamalg.fields import TensorField
    f = TensorField(CH3, 0, 0, {(): P("x1*x2")})
    Q = multivector(CH3, 2, {(0, 1): P("x3"), (1, 2): 1.0})
    got = schouten(f, Q).at([0.5, 2.0, -1.0])
    # -i_{df} Q, first slot
    df = np.array([2.0, 0.5, 0.0])
    Qm = Q.at([0.5, 2.0, -1.0])
    assert np.allclose(got, -df @ Qm)


# --- de Rham and Cartan calculus ---------------------------------------------

def test_de_rham_textbook():
    a = one_form(CH2, [0, P("x1", CH2)])
    assert de_rham(a, [0.3, 0.4])[0, 1] == 1.0


def test_de_rham_twisted_example():
    w = form(CH3, 2, {(1, 2): P("-x1")})
    dw = de_rham(w)
    assert list(dw.comps) == [(0, 1, 2)]
    assert dw.at([1, 2, 3])[0, 1, 2] == -1.0


def test_top_form_maps_to_zero():
    top = form(CH2, 2, {(0, 1): P("x1*x2", CH2)})
    assert not de_rham(top).comps


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4), st.integers(0, 2))
def test_d_squared_vanishes(seed, d, k):
    rng = np.random.default_rng(seed)
    ch = Chart(d)
    from hamalg.fields import TensorField
    if k == 0:
        f = TensorField(ch, 0, 0, {(): rand_poly(rng, ch, degree=3)})
        dd = de_rham(_grad(f, ch))
    else:
        alpha = form(ch, k, {idx: rand_poly(rng, ch, degree=3)
                             for idx in itertools.combinations(range(d), k)})
        dd = de_rham(de_rham(alpha))
    if dd.comps:
        assert np.max(np.abs(dd.eval(sample_points(d, 100)))) < 1e-10


def _grad(f, ch):
    from hamalg.expr import diff
    e = f.comps.get((), None)
    return one_form(ch, [diff(e, n) for n in ch.coord_names])


def test_lie_derivative_of_function():
    from hamalg.fields import TensorField
    f = TensorField(CH2, 0, 0, {(): P("x1^2*x2", CH2)})
    X = [P("x2", CH2), P("1", CH2)]
    got = lie_derivative(X, f, [1.5, -2.0])
    assert got == pytest.approx(-2.0 * 2 * 1.5 * -2.0 + 1.5 ** 2)


def test_double_interior_kills_two_forms(rng):
    w = form(CH3, 2, {k: rand_poly(rng, CH3) for k in itertools.combinations(range(3), 2)})
    X = [rand_poly(rng, CH3) for _ in range(3)]
    out = interior_product(X, interior_product(X, w))
    assert np.max(np.abs(out.eval(sample_points(3, 16)))) < 1e-9


@pytest.mark.parametrize("k", [1, 2])
def test_cartan_formula(rng, k):
    # randomized degree-1 polynomial data on R^3, 100 points
    X = [rand_poly(rng, CH3, degree=1) for _ in range(3)]
    alpha = form(CH3, k, {idx: rand_poly(rng, CH3, degree=1)
                          for idx in itertools.combinations(range(3), k)})
    lhs = lie_derivative(X, alpha)
    rhs = interior_product(X, de_rham(alpha)) + de_rham(interior_product(X, alpha))
    pts = sample_points(3, 100)
    assert np.max(np.abs(lhs.eval(pts) - rhs.eval(pts))) < 1e-10


def test_wedge_graded_commutative(rng):
    a = one_form(CH3, [rand_poly(rng, CH3) for _ in range(3)])
    b = form(CH3, 2, {k: rand_poly(rng, CH3) for k in itertools.combinations(range(3), 2)})
    pts = sample_points(3, 8)
    assert np.allclose(wedge(a, b).eval(pts), wedge(b, a).eval(pts), atol=1e-10)
    assert np.max(np.abs(wedge(a, a).eval(pts))) == 0.0


def test_vector_schouten_is_lie_bracket(rng):
    from hamalg.fields import vector_bracket
    X = [rand_poly(rng, CH3) for _ in range(3)]
    Y = [rand_poly(rng, CH3) for _ in range(3)]
    S = schouten(vector(CH3, X), vector(CH3, Y))
    br = vector_bracket(X, Y, CH3)
    pts = sample_points(3, 8)
    assert np.allclose(S.eval(pts), evaluate(br, CH3.coord_names, pts), atol=1e-10)
