"""Pure-numpy versions of the hot kernels.

Same contracts as the compiled ``_kernels`` module: each ``*_range`` function
fills ``out[start:stop]`` in place and reads nothing outside that slice of
the output.
"""
from __future__ import annotations

import math

import numpy as np

_CHUNK = 4096


def recurrence_coefficients(L: int):
    """Coefficients of the 4*pi-normalized associated Legendre recurrence.

    Returns (fmm, fm1, ra, rb): P_mm = fmm[m] s P_{m-1,m-1};
    P_{m+1,m} = fm1[m] x P_mm; P_km = ra[k,m] x P_{k-1,m} - rb[k,m] P_{k-2,m}.
    """
    fmm = np.zeros(L + 1)
    fm1 = np.zeros(L + 1)
    ra = np.zeros((L + 1, L + 1))
    rb = np.zeros((L + 1, L + 1))
    for m in range(1, L + 1):
        fmm[m] = math.sqrt(3.0) if m == 1 else math.sqrt((2 * m + 1) / (2.0 * m))
    for m in range(L + 1):
        fm1[m] = math.sqrt(2 * m + 3)
        for k in range(m + 2, L + 1):
            ra[k, m] = math.sqrt((2 * k - 1) * (2 * k + 1) / ((k - m) * (k + m)))
            rb[k, m] = math.sqrt((2 * k + 1) * (k + m - 1) * (k - m - 1)
                                 / ((k - m) * (k + m) * (2 * k - 3)))
    return fmm, fm1, ra, rb


def sh_evaluate_range(a, b, fmm, fm1, ra, rb, pts, out, start, stop):
    L = a.shape[0] - 1
    inv = 1.0 / math.sqrt(4.0 * math.pi)
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        p = pts[lo:hi]
        r = np.sqrt(np.sum(p * p, axis=1))
        x = p[:, 0] / r
        y = p[:, 1] / r
        ct = p[:, 2] / r
        s = np.sqrt(x * x + y * y)
        safe = s > 0.0
        cp = np.where(safe, x / np.where(safe, s, 1.0), 1.0)
        sp = np.where(safe, y / np.where(safe, s, 1.0), 0.0)
        total = np.zeros(hi - lo)
        pmm = np.ones(hi - lo)
        cm = np.ones(hi - lo)
        sm = np.zeros(hi - lo)
        for m in range(L + 1):
            if m > 0:
                pmm = fmm[m] * s * pmm
                cm, sm = cm * cp - sm * sp, sm * cp + cm * sp
            acc_c = a[m, m] * pmm
            acc_s = b[m, m] * pmm
            if m < L:
                prev, cur = pmm, fm1[m] * ct * pmm
                acc_c = acc_c + a[m + 1, m] * cur
                acc_s = acc_s + b[m + 1, m] * cur
                for k in range(m + 2, L + 1):
                    prev, cur = cur, ra[k, m] * ct * cur - rb[k, m] * prev
                    acc_c = acc_c + a[k, m] * cur
                    acc_s = acc_s + b[k, m] * cur
            total += acc_c * cm + acc_s * sm
        out[lo:hi] = total * inv


def cosine_quadrature_range(targets, nodes, wf, out, start, stop):
    # elementwise products and a per-row sum keep every output independent of
    # how rows are batched (BLAS blocking would not)
    rows = max(1, (1 << 22) // max(1, len(nodes)))
    dim = nodes.shape[1]
    for lo in range(start, stop, rows):
        hi = min(lo + rows, stop)
        t = targets[lo:hi]
        dots = t[:, 0:1] * nodes[:, 0]
        for d in range(1, dim):
            dots = dots + t[:, d:d + 1] * nodes[:, d]
        out[lo:hi] = np.sum(np.abs(dots) * wf, axis=1)
