# cython: boundscheck=False, wraparound=False, cdivision=True
"""C loop for tape evaluation.  Mirrors hamalg.tape._run_numpy.

Points are processed in blocks of BLOCK with the tape loop outside, so the
per-op dispatch is paid once per block and the inner loop is a plain array
sweep.  Results are bitwise those of the one-point-at-a-time evaluation.
"""
from libc.math cimport sin, cos, exp, sqrt

DEF BLOCK = 64


cdef inline double ipow(double x, int n) nogil:
    cdef double result = 1.0
    cdef double base = x
    cdef int m = n if n >= 0 else -n
    while m:
        if m & 1:
            result = result * base
        m >>= 1
        if m:
            base = base * base
    if n < 0:
        return 1.0 / result
    return result


cdef int run_block(int[::1] ops, int[::1] a0, int[::1] a1, int[::1] ip, double[::1] fp,
                   double[:, ::1] pts, Py_ssize_t start, Py_ssize_t stop,
                   double[:, ::1] regs) nogil:
    """Evaluate rows start..stop-1; returns 0, or an error code if any row fails."""
    cdef Py_ssize_t m = ops.shape[0]
    cdef Py_ssize_t b = stop - start
    cdef Py_ssize_t k, q
    cdef int op
    cdef double *r
    cdef double *x
    cdef double *y
    for k in range(m):
        op = ops[k]
        r = &regs[k, 0]
        if op == 0:
            for q in range(b):
                r[q] = fp[k]
        elif op == 1:
            for q in range(b):
                r[q] = pts[start + q, ip[k]]
        elif op == 6:
            x = &regs[a0[k], 0]
            for q in range(b):
                r[q] = -x[q]
        elif op >= 2 and op <= 5:
            x = &regs[a0[k], 0]
            y = &regs[a1[k], 0]
            if op == 2:
                for q in range(b):
                    r[q] = x[q] + y[q]
            elif op == 3:
                for q in range(b):
                    r[q] = x[q] - y[q]
            elif op == 4:
                for q in range(b):
                    r[q] = x[q] * y[q]
            else:
                for q in range(b):
                    if y[q] == 0.0:
                        return 1
                    r[q] = x[q] / y[q]
        else:
            x = &regs[a0[k], 0]
            if op == 7:
                for q in range(b):
                    if ip[k] < 0 and x[q] == 0.0:
                        return 1
                    r[q] = ipow(x[q], ip[k])
            elif op == 8:
                for q in range(b):
                    r[q] = sin(x[q])
            elif op == 9:
                for q in range(b):
                    r[q] = cos(x[q])
            elif op == 10:
                for q in range(b):
                    r[q] = exp(x[q])
            else:
                for q in range(b):
                    if x[q] < 0.0:
                        return 2
                    r[q] = sqrt(x[q])
    return 0


def run_tape(int[::1] ops, int[::1] a0, int[::1] a1, int[::1] ip, double[::1] fp,
             double[:, ::1] pts, int[::1] outs, double[:, ::1] res, double[:, ::1] regs):
    """Evaluate the tape at every row of ``pts`` into ``res``; ``regs`` has
    shape (len(ops), block_size()).

    Returns (code, point_index); code 0 on success, 1 for a zero divisor,
    2 for a negative square-root argument.  The index is the first failing row.
    """
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t start, stop, p, j, q
    cdef int code
    start = 0
    while start < n:
        stop = min(start + BLOCK, n)
        with nogil:
            code = run_block(ops, a0, a1, ip, fp, pts, start, stop, regs)
        if code:
            # locate the first failing row
            for p in range(start, stop):
                code = run_block(ops, a0, a1, ip, fp, pts, p, p + 1, regs)
                if code:
                    return code, p
        for j in range(outs.shape[0]):
            for q in range(stop - start):
                res[start + q, j] = regs[outs[j], q]
        start = stop
    return 0, 0


def block_size():
    return BLOCK
