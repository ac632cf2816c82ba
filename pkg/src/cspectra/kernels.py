"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``CSPECTRA_BACKEND=python``
forces the numpy fallback. Work is split over output rows only, and every
output entry is summed in a fixed order, so results do not depend on the
number of threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

python_impl = _fallback
cython_impl = _compiled


def _select():
    choice = os.environ.get("CSPECTRA_BACKEND", "auto").lower()
    if choice == "python" or _compiled is None:
        if choice == "cython":
            raise ImportError("CSPECTRA_BACKEND=cython but the extension is not built")
        return "python", _fallback
    return "cython", _compiled


BACKEND, _impl = _select()


@lru_cache(maxsize=8)
def _coefficients(L: int):
    return _fallback.recurrence_coefficients(L)


def _split(n_out: int, threads: int, fn):
    threads = max(1, int(threads))
    if threads == 1 or n_out < 2 * threads:
        fn(0, n_out)
        return
    bounds = np.linspace(0, n_out, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda ab: fn(*ab), zip(bounds[:-1], bounds[1:])))


def sh_evaluate(a, b, points, threads: int = 1, impl=None):
    """Evaluate an S^2 expansion with order arrays (a, b) at ``points`` (N, 3)."""
    impl = _impl if impl is None else impl
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
    fmm, fm1, ra, rb = _coefficients(a.shape[0] - 1)
    out = np.empty(len(pts))
    _split(len(pts), threads,
           lambda lo, hi: impl.sh_evaluate_range(a, b, fmm, fm1, ra, rb, pts, out, lo, hi))
    return out


def cosine_quadrature(targets, nodes, weighted_values, threads: int = 1, impl=None):
    """out[i] = sum_j weighted_values[j] * |targets[i] . nodes[j]|."""
    impl = _impl if impl is None else impl
    t = np.ascontiguousarray(targets, dtype=float)
    x = np.ascontiguousarray(nodes, dtype=float)
    wf = np.ascontiguousarray(weighted_values, dtype=float)
    out = np.empty(len(t))
    _split(len(t), threads, lambda lo, hi: impl.cosine_quadrature_range(t, x, wf, out, lo, hi))
    return out
