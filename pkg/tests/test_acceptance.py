"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and when this file is run as a script.
"""
import time

import numpy as np
import pytest

from conftest import mutate_mu, rand_poly, random_connection
from hamalg import sigma
from hamalg.algebroid import (ConnectionData, LieAlgebroidData, check_axioms,
                              check_curvature_identity)
from hamalg.checks import sample_points
from hamalg.courant import check_dirac, graph_poisson, graph_presymplectic, standard
from hamalg.fields import Chart, form
from hamalg.graded import GradedSpace, graded_points, verify_compatibility, verify_master_equivalence
from hamalg.momentum import Geometry, MomentumData, check_D, check_P, check_S
from hamalg.parser import parse_expr
from hamalg.report import emit_report
from hamalg.scenario import bundled_names, load_scenario
from hamalg.suites import momentum_checks, run_suite, verdict_equivalence

RESULTS = {}


def record(n, title, ok, detail=""):
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}" + (f"  [{detail}]" if detail else "")
    assert ok, RESULTS[n]


def by_id(recs):
    return {r.check_id.rsplit(".", 1)[-1]: r for r in recs}


def test_criterion_1_structure():
    t0 = time.perf_counter()
    sc = load_scenario("so3_coadjoint")
    pts = sample_points(3, 64)
    good = check_axioms(sc.algebroid, pts)
    A = sc.algebroid
    broken = A.with_c({(2, 0, 1): -A.C(2, 0, 1)})
    bad = check_axioms(broken, pts)
    elapsed = time.perf_counter() - t0
    good_res = max(r.max_residual for r in good)
    bad_res = max(r.max_residual for r in bad)
    ok = all(r.passed for r in good) and good_res < 1e-9 and bad_res > 1e-3 and elapsed < 5.0
    record(1, "Lie algebroid axioms", ok,
           f"so3 {good_res:.1e}, broken C {bad_res:.1e}, {elapsed:.2f}s")


def test_criterion_2_dirac():
    pts2, pts3 = sample_points(2), sample_points(3)
    rot = load_scenario("rotation_R2").momentum_data().geometry
    so3 = load_scenario("so3_coadjoint").momentum_data().geometry
    r_rot = by_id(check_dirac(standard(rot.omega.chart), graph_presymplectic(rot.omega), pts2))
    r_so3 = by_id(check_dirac(standard(so3.pi.chart), graph_poisson(so3.pi), pts3))
    ch3 = Chart(3)
    w_bad = form(ch3, 2, {(1, 2): parse_expr("x1", ch3), (0, 1): parse_expr("x3^2", ch3)})
    r_bad = by_id(check_dirac(standard(ch3), graph_presymplectic(w_bad), pts3))
    tw = load_scenario("twisted_H_R3").momentum_data().geometry
    r_tw = check_dirac(standard(ch3, tw.H), graph_presymplectic(tw.omega), pts3)
    r_tw_bad = by_id(check_dirac(standard(ch3, tw.H.scale(-1.0)), graph_presymplectic(tw.omega),
                                 pts3))
    keys = ("isotropy", "closure")
    worst = max(r[k].max_residual for r in (r_rot, r_so3) for k in keys)
    ok = (all(r[k].passed for r in (r_rot, r_so3) for k in keys) and worst < 1e-9
          and not r_bad["closure"].passed
          and all(r.passed for r in r_tw) and not r_tw_bad["closure"].passed)
    record(2, "Dirac structures", ok,
           f"graphs {worst:.1e}, d omega != 0 closure {r_bad['closure'].max_residual:.1e}, "
           f"twisted ok={all(r.passed for r in r_tw)}, wrong H closure "
           f"{r_tw_bad['closure'].max_residual:.1e}")


def test_criterion_3_momentum():
    tol = 1e-9
    rot = load_scenario("rotation_R2").momentum_data()
    so3 = load_scenario("so3_coadjoint").momentum_data()
    p2, p3 = sample_points(2), sample_points(3)
    s_ok = all(r.passed for r in check_S(rot, p2, tol))
    p_ok = all(r.passed for r in check_P(so3, p3, tol))
    agree = 0
    total = 0
    for md, pts, geo in ((rot, p2, check_S), (so3, p3, check_P)):
        cases = [md] + [mutate_mu(md, np.random.default_rng(1000 + k), k) for k in range(20)]
        for m in cases:
            v = verdict_equivalence(m, geo(m, pts, tol) + check_D(m, pts, tol))
            agree += v.passed
            total += 1
    ok = s_ok and p_ok and agree == total
    record(3, "momentum conditions vs D1-D3", ok,
           f"S ok={s_ok}, P ok={p_ok}, verdict agreement {agree}/{total}")


def test_criterion_4_d3_paths():
    worst = 0.0
    ok = True
    checked = 0
    for name in sorted(bundled_names()):
        sc = load_scenario(name)
        md = sc.momentum_data()
        recs = by_id(momentum_checks(md, sample_points(sc.dim), 1e-9, sc.gdsm))
        if not recs["D2"].passed:
            continue
        checked += 1
        for k in ("D3_paths_direct_vs_torsion", "D3_paths_direct_vs_equivariance"):
            worst = max(worst, recs[k].max_residual)
            ok = ok and recs[k].passed
    ok = ok and worst < 1e-9 and checked > 0
    record(4, "D3 path agreement", ok, f"{checked} scenarios with D2, worst {worst:.1e}")


def _random_algebroid(rng, d, r):
    ch = Chart(d)
    rho = [[rand_poly(rng, ch, degree=1, terms=2) for _ in range(d)] for _ in range(r)]
    c = {(cc, a, b): rand_poly(rng, ch, degree=1, terms=2)
         for cc in range(r) for a in range(r) for b in range(a + 1, r)}
    return LieAlgebroidData(ch, r, rho, c), ch


def test_criterion_5_curvature_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    ok = True
    n = 0
    for d in range(1, 5):
        for r in range(1, 4):
            A, ch = _random_algebroid(rng, d, r)
            conn = random_connection(rng, ch, r)
            rec = check_curvature_identity(A, conn, sample_points(d, 100))
            worst = max(worst, rec.max_residual)
            ok = ok and rec.passed and rec.samples == 100
            n += 1
    ok = ok and worst < 1e-9
    record(5, "basic curvature identity", ok, f"{n} (d, r) cases, worst {worst:.1e}")


def test_criterion_6_akz():
    t0 = time.perf_counter()
    from test_graded import basic_curvature_scenario, curved_scenario, non_invariant_pi
    sc = load_scenario("so3_coadjoint")
    cases = {"base": (sc.algebroid, sc.connection, sc.bivector),
             "R": curved_scenario(),
             "A_nabla_pi": (sc.algebroid, sc.connection, non_invariant_pi(sc)),
             "S": basic_curvature_scenario()}
    expect_fail = {"R": "thm_R", "A_nabla_pi": "thm_A_nabla_pi", "S": "thm_S"}
    ok = True
    master = None
    for name, (A, conn, pi) in cases.items():
        pts = graded_points(GradedSpace.of(A))
        recs = by_id(verify_master_equivalence(A, conn, pi, pts)
                     + verify_compatibility(A, conn, pi, pts))
        ok = ok and recs["thm_equivalence"].passed and recs["prop_compat_equivalence"].passed
        if name == "base":
            master = recs["master_equation"].max_residual
            ok = ok and recs["master_equation"].passed and master < 1e-10
        else:
            ok = ok and not recs[expect_fail[name]].passed
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    record(6, "master equation and equivalences", ok,
           f"master {master:.1e}, mutations R, A-nabla pi, S, {elapsed:.2f}s")


def test_criterion_7_sigma():
    so3 = load_scenario("so3_coadjoint")
    broken = load_scenario("broken_pi_R3")
    m = sigma.SigmaModel(so3.algebroid, None, so3.bivector)
    mb = sigma.SigmaModel(sigma.zero_algebroid(broken.chart), None, broken.bivector)
    vals, orders = sigma.gauge_convergence(m, (8, 16, 32))
    bvals, _ = sigma.gauge_convergence(mb, (8, 16, 32))
    rng = np.random.default_rng(7)
    mc = sigma.SigmaModel(so3.algebroid, random_connection(rng, so3.chart, 3), so3.bivector)
    ws = sigma.Worldsheet("torus", 8)
    fc = 0.0
    for seed in range(5):
        cfg = sigma.random_config(mc, ws, seed=seed)
        fc = max(fc, abs(sigma.action_gpsm(mc, ws, cfg)
                         - sigma.action_gpsm(mc, ws, cfg, covariant=True)))
    ok = min(orders) >= 0.9 and min(bvals) > 1e-3 and fc < 1e-10
    record(7, "gauge variation convergence", ok,
           f"so3 orders {orders[0]:.3f}, {orders[1]:.3f}; broken |dS| "
           f"{', '.join(f'{v:.3f}' for v in bvals)}; flat/cov {fc:.1e}")


def test_criterion_8_boundary():
    sc = load_scenario("so3_coadjoint")
    ch = sc.chart
    mu = [parse_expr(s, ch) for s in ("x1", "x2", "x3")]
    md = MomentumData(sc.algebroid, ConnectionData.trivial(3, 3), mu,
                      Geometry("poisson", pi=sc.bivector), action=True)
    pts = sample_points(3)
    bc = by_id(sigma.check_boundary_conditions(md, pts))
    coef_ok = bc["bou02"].max_residual < 1e-9 and bc["bou04"].max_residual < 1e-9
    model = sigma.SigmaModel(sc.algebroid, None, sc.bivector)
    totals, coef, hs = [], 0.0, []
    for N in (8, 16, 32):
        ws = sigma.Worldsheet("rectangle", N)
        cfg = sigma.random_config(model, ws, seed=5, x0=np.ones(3), clamp=True)
        par = sigma.random_params(model, ws, seed=6)
        bv = sigma.boundary_variation(model, ws, cfg, par, mu)
        totals.append(abs(bv.total))
        hs.append(ws.h)
        coef = max(coef, *bv.coefficient_residuals)
    C = max(t / h for t, h in zip(totals, hs))
    scaling = coef < 1e-9 and all(t <= C * h + 1e-14 for t, h in zip(totals, hs)) \
        and totals[-1] <= totals[0]
    g = load_scenario("gdsm_cayley")
    gmd = g.momentum_data()
    gp = sample_points(2)
    grecs = by_id(sigma.gdsm_structure_checks(g.gdsm, gp) + sigma.check_gdsm_D1(gmd, g.gdsm, gp)
                  + sigma.check_boundary_conditions(gmd, gp, gd=g.gdsm))
    gd_ok = (grecs["U_ordering"].passed and grecs["A_nabla_U"].passed
             and grecs["A_nabla_U"].details["agrees_with_D1"]
             and grecs["bou12_parametrization"].passed)
    ok = coef_ok and scaling and gd_ok
    record(8, "boundary conditions and generalized Dirac data", ok,
           f"bou02 {bc['bou02'].max_residual:.1e}, bou04 {bc['bou04'].max_residual:.1e}, "
           f"totals {', '.join(f'{t:.1e}' for t in totals)}, gdsm ok={gd_ok}")


@pytest.mark.parametrize("name", ["so3_coadjoint"])
def test_criterion_9_determinism(name):
    sc = load_scenario(name)
    a = emit_report(run_suite(sc, "all"), "json")
    b = emit_report(run_suite(load_scenario(name), "all"), "json")
    record(9, "byte-identical JSON reports", a == b, f"{name}, {len(a)} bytes")


if __name__ == "__main__":
    import sys
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
