# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled B-spline kernels.

Evaluates only the ``order + 1`` basis functions that can be nonzero at each
input (the triangular Cox-de Boor scheme) and scatters them into the dense
output. Arithmetic mirrors the dense recursion in ``_kernels_py`` term by term,
so both backends agree to the last bit on in-support values.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

cdef enum:
    MAX_ORDER = 15


cdef inline double _knot(const double* t, Py_ssize_t last, Py_ssize_t j, double h) noexcept nogil:
    # Virtual uniform extension outside the stored knot vector. Values built
    # from virtual knots only feed basis indices that are dropped.
    if j < 0:
        return t[0] + j * h
    if j > last:
        return t[last] + (j - last) * h
    return t[j]


def bspline_basis(x, knots, int order):
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"spline order must be in [0, {MAX_ORDER}], got {order}")
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(knots, dtype=np.float64)
    cdef Py_ssize_t nb = xv.shape[0]
    cdef Py_ssize_t nf = xv.shape[1]
    cdef Py_ssize_t n_int = t.shape[0] - 1
    cdef Py_ssize_t n_basis = n_int - order
    if n_basis < 1:
        raise ValueError("knot vector too short for requested order")

    basis_arr = np.zeros((nb, nf, n_basis), dtype=np.float64)
    dbasis_arr = np.zeros((nb, nf, n_basis), dtype=np.float64)
    cdef double[:, :, ::1] out = basis_arr
    cdef double[:, :, ::1] dout = dbasis_arr

    cdef double cur[MAX_ORDER + 1]
    cdef double nxt[MAX_ORDER + 1]
    cdef double low[MAX_ORDER + 1]
    cdef double h = (t[n_int] - t[0]) / n_int
    cdef double xi, tj, tjp, tj1, tjp1, left, right, a, b
    cdef Py_ssize_t bi, fi, s, p, r, j, q
    cdef double kd = order
    cdef const double* tp = &t[0]

    with nogil:
        for bi in range(nb):
            for fi in range(nf):
                xi = xv[bi, fi]
                # the last knot interval is closed so the right end is covered
                if not (xi >= t[0] and xi <= t[n_int]):
                    continue
                s = <Py_ssize_t> floor((xi - t[0]) / h)
                if s < 0:
                    s = 0
                if s > n_int - 1:
                    s = n_int - 1
                while s > 0 and xi < t[s]:
                    s -= 1
                while s < n_int - 1 and xi >= t[s + 1]:
                    s += 1

                # cur[r] holds N_{s-p+r, p}
                cur[0] = 1.0
                low[0] = 1.0
                for p in range(1, order + 1):
                    for r in range(p + 1):
                        j = s - p + r
                        tj = _knot(tp, n_int, j, h)
                        tjp = _knot(tp, n_int, j + p, h)
                        tj1 = _knot(tp, n_int, j + 1, h)
                        tjp1 = _knot(tp, n_int, j + p + 1, h)
                        if r >= 1:
                            left = (xi - tj) / (tjp - tj) * cur[r - 1]
                        else:
                            left = 0.0
                        if r <= p - 1:
                            right = (tjp1 - xi) / (tjp1 - tj1) * cur[r]
                        else:
                            right = 0.0
                        nxt[r] = left + right
                    for r in range(p):
                        low[r] = cur[r]
                    for r in range(p + 1):
                        cur[r] = nxt[r]

                for r in range(order + 1):
                    j = s - order + r
                    if j < 0 or j >= n_basis:
                        continue
                    out[bi, fi, j] = cur[r]
                    if order == 0:
                        continue
                    # low[q] holds N_{s-order+1+q, order-1}
                    q = r - 1
                    a = low[q] if q >= 0 else 0.0
                    b = low[q + 1] if q + 1 <= order - 1 else 0.0
                    tj = _knot(tp, n_int, j, h)
                    tjp = _knot(tp, n_int, j + order, h)
                    tj1 = _knot(tp, n_int, j + 1, h)
                    tjp1 = _knot(tp, n_int, j + order + 1, h)
                    dout[bi, fi, j] = kd * (a / (tjp - tj) - b / (tjp1 - tj1))
    return basis_arr, dbasis_arr
