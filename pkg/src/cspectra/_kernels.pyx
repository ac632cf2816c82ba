# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled hot loops: spherical-harmonic point evaluation and the |u.x| sum."""
from libc.math cimport sqrt, fabs, M_PI


def sh_evaluate_range(const double[:, ::1] a, const double[:, ::1] b, const double[::1] fmm,
                      const double[::1] fm1, const double[:, ::1] ra, const double[:, ::1] rb,
                      const double[:, ::1] pts, double[::1] out, Py_ssize_t start,
                      Py_ssize_t stop):
    cdef Py_ssize_t L = a.shape[0] - 1
    cdef Py_ssize_t i, m, k
    cdef double x, y, ct, r, s, cp, sp, cm, sm, tmp, pmm, prev, cur, nxt
    cdef double acc_c, acc_s, total
    cdef double inv = 1.0 / sqrt(4.0 * M_PI)
    with nogil:
        for i in range(start, stop):
            r = sqrt(pts[i, 0] * pts[i, 0] + pts[i, 1] * pts[i, 1] + pts[i, 2] * pts[i, 2])
            x = pts[i, 0] / r
            y = pts[i, 1] / r
            ct = pts[i, 2] / r
            s = sqrt(x * x + y * y)
            if s > 0.0:
                cp = x / s
                sp = y / s
            else:
                cp = 1.0
                sp = 0.0
            total = 0.0
            pmm = 1.0
            cm = 1.0
            sm = 0.0
            for m in range(L + 1):
                if m > 0:
                    pmm = fmm[m] * s * pmm
                    tmp = cm * cp - sm * sp
                    sm = sm * cp + cm * sp
                    cm = tmp
                acc_c = a[m, m] * pmm
                acc_s = b[m, m] * pmm
                if m < L:
                    prev = pmm
                    cur = fm1[m] * ct * pmm
                    acc_c = acc_c + a[m + 1, m] * cur
                    acc_s = acc_s + b[m + 1, m] * cur
                    for k in range(m + 2, L + 1):
                        nxt = ra[k, m] * ct * cur - rb[k, m] * prev
                        prev = cur
                        cur = nxt
                        acc_c = acc_c + a[k, m] * cur
                        acc_s = acc_s + b[k, m] * cur
                total = total + acc_c * cm + acc_s * sm
            out[i] = total * inv


def cosine_quadrature_range(const double[:, ::1] targets, const double[:, ::1] nodes,
                            const double[::1] wf, double[::1] out, Py_ssize_t start,
                            Py_ssize_t stop):
    cdef Py_ssize_t i, j, d
    cdef Py_ssize_t nn = nodes.shape[0]
    cdef Py_ssize_t dim = nodes.shape[1]
    cdef double acc, dot
    with nogil:
        for i in range(start, stop):
            acc = 0.0
            for j in range(nn):
                dot = 0.0
                for d in range(dim):
                    dot = dot + targets[i, d] * nodes[j, d]
                acc = acc + wf[j] * fabs(dot)
            out[i] = acc
