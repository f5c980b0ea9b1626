import numpy as np
import pytest

from hamalg import tape
from hamalg.checks import sample_points
from hamalg.fields import Chart
from hamalg.parser import parse_expr
from hamalg.tape import DomainError, Tape

CH = Chart(2)
needs_kernel = pytest.mark.skipif(tape._kernel is None, reason="compiled kernel not built")


@needs_kernel
@pytest.mark.parametrize("n", [1, 63, 64, 65, 200])
def test_backends_agree(n):
    # arithmetic is bitwise equal; libm and numpy transcendentals may differ by an ulp
    exprs = [parse_expr(s, CH) for s in ("sin(x1)*x2^3 - exp(x2)/(x1 + 5)", "sqrt(x1^2 + 1)",
                                         "cos(x1 - x2)^-2", "7")]
    t = Tape(exprs, CH.coord_names)
    pts = sample_points(2, n)
    a, b = t.eval(pts, backend="cython"), t.eval(pts, backend="python")
    np.testing.assert_array_max_ulp(a, b, maxulp=2)
    assert np.array_equal(a[:, 1:], b[:, 1:])


@needs_kernel
def test_first_failing_point_matches():
    t = Tape([parse_expr("1/(x1 - 3) + sqrt(x2)", CH)], CH.coord_names)
    pts = np.ones((200, 2))
    pts[130, 0] = 3.0
    pts[70, 1] = -1.0
    got = []
    for b in ("cython", "python"):
        with pytest.raises(DomainError) as ei:
            t.eval(pts, backend=b)
        got.append((str(ei.value), ei.value.point))
    assert got[0] == got[1] and got[0][1] == (1.0, -1.0)


def test_wrong_point_width():
    with pytest.raises(ValueError):
        Tape([parse_expr("x1", CH)], CH.coord_names).eval(np.zeros((3, 3)))
