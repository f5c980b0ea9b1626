"""Compare the compiled and numpy tape backends on realistic residual tapes.

    python benchmarks/bench_tape.py [--points 20000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from hamalg import tape
from hamalg.algebroid import (ConnectionData, LieAlgebroidData, basic_curvature_S_definition,
                              flatten)
from hamalg.checks import sample_points
from hamalg.fields import Chart, schouten
from hamalg.momentum import d2_residuals
from hamalg.parser import parse_expr
from hamalg.scenario import load_scenario


def _random_data(d, r, seed):
    rng = np.random.default_rng(seed)
    ch = Chart(d)
    names = list(ch.coord_names)

    def poly():
        terms = [f"({rng.integers(-3, 4)})*{names[rng.integers(d)]}*{names[rng.integers(d)]}"
                 for _ in range(3)]
        return parse_expr(" + ".join(terms), ch)
    rho = [[poly() for _ in range(d)] for _ in range(r)]
    c = {(k, a, b): poly() for k in range(r) for a in range(r) for b in range(a + 1, r)}
    omega = [[[poly() for _ in range(d)] for _ in range(r)] for _ in range(r)]
    return LieAlgebroidData(ch, r, rho, c), ConnectionData(omega), ch


def workloads():
    A, conn, ch = _random_data(4, 3, 0)
    yield "random S definition d=4 r=3", flatten(basic_curvature_S_definition(A, conn)), ch
    so3 = load_scenario("so3_coadjoint")
    member, closure = d2_residuals(so3.momentum_data())
    yield "so3 D2 closure", member + closure, so3.chart
    broken = load_scenario("broken_pi_R3")
    pi = broken.bivector.scale(parse_expr("1 + x1*x2", broken.chart))
    yield "deformed [pi, pi]", list(schouten(pi, pi).comps.values()), broken.chart


def best_of(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if tape._kernel is not None else [])
    if len(backends) == 1:
        print("compiled kernel not available; timing the numpy backend only")
    print(f"{'workload':<28} {'ops':>6} " + " ".join(f"{b:>10}" for b in backends) + "  speedup")
    for name, exprs, ch in workloads():
        t = tape.Tape(exprs, ch.coord_names)
        pts = sample_points(ch.dim, args.points, seed=1)
        ref = t.eval(pts, backend="python")
        times = []
        for b in backends:
            np.testing.assert_allclose(t.eval(pts, backend=b), ref, rtol=1e-12, atol=1e-12)
            times.append(best_of(lambda: t.eval(pts, backend=b), args.repeat))
        sp = f"{times[0] / times[-1]:7.1f}x" if len(times) > 1 else "      -"
        print(f"{name:<28} {len(t):>6} " + " ".join(f"{x * 1e3:8.2f}ms" for x in times) + f"  {sp}")


if __name__ == "__main__":
    main()
