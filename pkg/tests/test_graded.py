import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rand_poly, random_connection
from hamalg.algebroid import ConnectionData, LieAlgebroidData, curvature_R
from hamalg.checks import residual
from hamalg.expr import esum, mul, neg, sub, var
from hamalg.fields import Chart, multivector, schouten
from hamalg.graded import (BracketMode, GradedPolynomial, GradedSpace, covariant_to_flat, gbracket,
                           graded_points, master_residual, substitution_bracket, theta_A, theta_pi,
                           verify_compatibility, verify_master_equivalence)
from hamalg.oddpoly import OddPoly
from hamalg.parser import parse_expr
from hamalg.scenario import load_scenario
from hamalg.tape import evaluate

CH2, CH3 = Chart(2), Chart(3)


def coeff_max(F: GradedPolynomial, pts):
    return residual(F.coefficients(), F.space.names, pts)[0]


def ids(recs):
    return {r.check_id.split(".")[-1]: r for r in recs}


@pytest.fixture(scope="module")
def so3sc():
    return load_scenario("so3_coadjoint")


def generators(sp_):
    return ([sp_.z(i) for i in range(sp_.d)] + [sp_.a(a) for a in range(sp_.r)]
            + [sp_.x(i) for i in range(sp_.d)] + [sp_.y(a) for a in range(sp_.r)])


def const_of(F):
    e = F.terms.get((), None)
    return None if e is None else evaluate([e], F.space.names, [[0.0] * len(F.space.names)])[0, 0]


# --- canonical brackets -------------------------------------------------------

def test_canonical_table(so3sc):
    sp_ = GradedSpace.of(so3sc.algebroid)
    flat = BracketMode.flat()
    for i, j in itertools.product(range(3), repeat=2):
        assert const_of(gbracket(sp_.x(i), sp_.z(j), flat)) == (1.0 if i == j else None)
        assert gbracket(sp_.z(i), sp_.z(j), flat).is_zero()
        assert const_of(gbracket(sp_.y(i), sp_.a(j), flat)) == (1.0 if i == j else None)


def test_covariant_zz_is_curvature():
    rng = np.random.default_rng(3)
    A = LieAlgebroidData(CH2, 2, [[0, 0], [0, 0]])
    conn = random_connection(rng, CH2, 2)
    sp_ = GradedSpace.of(A)
    mode = BracketMode.covariant(A, conn)
    R = curvature_R(A, conn)
    pts = graded_points(sp_, 16)
    ys = sp_.y_names
    br = gbracket(sp_.z(0), sp_.z(1), mode)
    # {z0, z1} = -R^e_{01c} a^c y_e
    res = []
    for c in range(2):
        expect = neg(esum(mul(R[e][c][0][1], var(ys[e])) for e in range(2)))
        res.append(sub(br.terms.get((2 + c,), parse_expr("0", CH2)), expect))
    assert residual(res, sp_.names, pts)[0] < 1e-10


def test_covariant_mode_needs_connection():
    with pytest.raises(ValueError):
        BracketMode("covariant")


def test_table_against_substitution_oracle(so3sc):
    rng = np.random.default_rng(1)
    A = so3sc.algebroid
    conn = random_connection(rng, CH3, 3)
    sp_ = GradedSpace.of(A)
    mode = BracketMode.covariant(A, conn)
    pts = graded_points(sp_, 16)
    worst = 0.0
    for F, G in itertools.product(generators(sp_), repeat=2):
        worst = max(worst, coeff_max(gbracket(F, G, mode) - substitution_bracket(F, G, conn), pts))
    assert worst < 1e-10


def _random_graded(rng, sp_, degree):
    p = OddPoly()
    n_odd = sp_.d + sp_.r
    ch = Chart(len(sp_.names), sp_.names)
    for key in itertools.combinations(range(n_odd), degree):
        if rng.random() < 0.5:
            p = p + OddPoly.monomial(key, rand_poly(rng, ch, degree=2, terms=2))
    return GradedPolynomial(sp_, p)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 2), st.integers(0, 2))
def test_graded_antisymmetry(seed, p, q):
    rng = np.random.default_rng(seed)
    A = LieAlgebroidData(CH2, 2, [[0, 0], [0, 0]])
    sp_ = GradedSpace.of(A)
    F, G = _random_graded(rng, sp_, p), _random_graded(rng, sp_, q)
    lhs = gbracket(F, G)
    rhs = gbracket(G, F).scale(-((-1) ** ((p - 1) * (q - 1))))
    assert coeff_max(lhs - rhs, graded_points(sp_, 8)) < 1e-10


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6))
def test_graded_jacobi_flat(seed):
    rng = np.random.default_rng(seed)
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    sp_ = GradedSpace.of(A)
    degs = [int(rng.integers(0, 3)) for _ in range(3)]
    F, G, H = (_random_graded(rng, sp_, k) for k in degs)
    f, g = degs[0] - 1, degs[1] - 1
    lhs = gbracket(F, gbracket(G, H))
    rhs = gbracket(gbracket(F, G), H) + gbracket(G, gbracket(F, H)).scale((-1) ** (f * g))
    assert coeff_max(lhs - rhs, graded_points(sp_, 8)) < 1e-9


def test_graded_jacobi_covariant_on_flat_connection():
    # omega = x2 dx1 + x1 dx2 is closed, hence flat in rank 1
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    conn = ConnectionData([[[parse_expr("x2", CH2), parse_expr("x1", CH2)]]])
    mode = BracketMode.covariant(A, conn)
    sp_ = GradedSpace.of(A)
    rng = np.random.default_rng(9)
    for _ in range(3):
        F, G, H = (_random_graded(rng, sp_, 1) for _ in range(3))
        lhs = gbracket(F, gbracket(G, H, mode), mode)
        rhs = gbracket(gbracket(F, G, mode), H, mode) + gbracket(G, gbracket(F, H, mode), mode)
        assert coeff_max(lhs - rhs, graded_points(sp_, 8)) < 1e-9


def test_self_bracket_brute_force():
    rng = np.random.default_rng(11)
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    sp_ = GradedSpace.of(A)
    F1, F2 = _random_graded(rng, sp_, 2), _random_graded(rng, sp_, 2)
    F = F1 + F2
    whole = gbracket(F, F)
    parts = gbracket(F1, F1) + gbracket(F2, F2) + gbracket(F1, F2).scale(2.0)
    assert coeff_max(whole - parts, graded_points(sp_, 8)) < 1e-10


# --- Hamiltonians -------------------------------------------------------------

def test_theta_pi_zero():
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    assert theta_pi(multivector(CH2, 2, {}), GradedSpace.of(A)).is_zero()


def test_abelian_theta_A_has_no_y_terms():
    A = LieAlgebroidData(CH2, 2, [[parse_expr("x2", CH2), 1], [0, parse_expr("x1", CH2)]])
    t = theta_A(A, GradedSpace.of(A))
    assert all(len(k) == 2 and k[0] < 2 <= k[1] for k in t.terms)
    assert t.degree == 2


def test_so3_theta_A_master(so3sc):
    A = so3sc.algebroid
    sp_ = GradedSpace.of(A)
    r = master_residual(theta_A(A, sp_), BracketMode.flat(), graded_points(sp_, 100))
    assert r.passed and r.max_residual < 1e-10


def test_theta_A_covariant_reexpands_to_flat(so3sc):
    rng = np.random.default_rng(4)
    A = so3sc.algebroid
    conn = random_connection(rng, CH3, 3)
    sp_ = GradedSpace.of(A)
    diff_ = covariant_to_flat(theta_A(A, sp_, conn, covariant=True), conn) - theta_A(A, sp_)
    assert coeff_max(diff_, graded_points(sp_, 16)) < 1e-10
    # Theta_pi is not invariant under the same re-expansion
    pi = so3sc.bivector
    d2 = covariant_to_flat(theta_pi(pi, sp_), conn) - theta_pi(pi, sp_)
    assert coeff_max(d2, graded_points(sp_, 16)) > 1e-3


def test_master_so3(so3sc):
    A, pi = so3sc.algebroid, so3sc.bivector
    sp_ = GradedSpace.of(A)
    r = master_residual(theta_pi(pi, sp_) + theta_A(A, sp_, so3sc.connection, covariant=True),
                        BracketMode.covariant(A, so3sc.connection), graded_points(sp_), tol=1e-10)
    assert r.passed


def test_master_non_poisson_equals_schouten_obstruction():
    Q = lambda s: parse_expr(s, CH3)
    pi = multivector(CH3, 2, {(0, 1): Q("x1"), (0, 2): Q("x2"), (1, 2): Q("1")})
    A = LieAlgebroidData(CH3, 1, [[0, 0, 0]])
    sp_ = GradedSpace.of(A)
    sq = gbracket(theta_pi(pi, sp_), theta_pi(pi, sp_))
    pt = [[1.0, 1.0, 1.0, 0.0]]
    got = evaluate([sq.terms[(0, 1, 2)]], sp_.names, pt)[0, 0]
    sch = schouten(pi, pi).at([1, 1, 1])[0, 1, 2]
    assert got == -sch and abs(got) > 1e-3


def test_master_of_zero():
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    sp_ = GradedSpace.of(A)
    assert master_residual(sp_.zero(), BracketMode.flat(), graded_points(sp_)).max_residual == 0.0


# --- equivalences -------------------------------------------------------------

def curved_scenario():
    """Abelian rank-1 algebroid with rho = 0 and omega^1_{11} = x2: only R != 0."""
    A = LieAlgebroidData(CH2, 1, [[0, 0]])
    conn = ConnectionData([[[parse_expr("x2", CH2), 0]]])
    return A, conn, multivector(CH2, 2, {(0, 1): 1.0})


def basic_curvature_scenario():
    """Bundle of Lie algebras with x-dependent C and flat trivial connection: only S != 0."""
    A = LieAlgebroidData(CH2, 2, [[0, 0], [0, 0]], {(0, 0, 1): parse_expr("x1", CH2)})
    return A, ConnectionData.trivial(2, 2), multivector(CH2, 2, {(0, 1): 1.0})


def non_invariant_pi(sc):
    pi = sc.bivector
    Q = lambda s: parse_expr(s, CH3)
    return pi.scale(Q("1 + x1"))


def _run(A, conn, pi):
    pts = graded_points(GradedSpace.of(A))
    return ids(verify_master_equivalence(A, conn, pi, pts) + verify_compatibility(A, conn, pi, pts))


def test_equivalences_base(so3sc):
    r = _run(so3sc.algebroid, so3sc.connection, so3sc.bivector)
    assert r["master_equation"].passed and r["thm_equivalence"].passed
    assert r["prop_compat_bracket"].passed and r["prop_compat_equivalence"].passed


def test_mutation_R_only():
    r = _run(*curved_scenario())
    assert not r["thm_R"].passed
    assert r["thm_A_nabla_pi"].passed and r["thm_S"].passed
    assert not r["master_equation"].passed
    assert r["thm_equivalence"].passed and r["prop_compat_equivalence"].passed


def test_mutation_A_nabla_pi(so3sc):
    r = _run(so3sc.algebroid, so3sc.connection, non_invariant_pi(so3sc))
    assert not r["thm_A_nabla_pi"].passed and r["thm_S"].passed and r["thm_R"].passed
    assert not r["prop_compat_bracket"].passed
    assert r["thm_equivalence"].passed and r["prop_compat_equivalence"].passed


def test_mutation_S_only():
    r = _run(*basic_curvature_scenario())
    assert not r["thm_S"].passed
    assert r["thm_R"].passed and r["thm_A_nabla_pi"].passed and r["thm_lie_algebroid"].passed
    assert not r["prop_compat_bracket"].passed and not r["master_equation"].passed
    assert r["thm_equivalence"].passed and r["prop_compat_equivalence"].passed


def test_equivalence_random_connections(so3sc):
    rng = np.random.default_rng(21)
    for _ in range(10):
        conn = random_connection(rng, CH3, 3)
        r = _run(so3sc.algebroid, conn, so3sc.bivector)
        assert r["thm_equivalence"].passed
