"""Funk (spherical Radon) and cosine transforms.

Each transform has a spectral backend (diagonal multiplier, exact on
band-limited data) and a quadrature backend used for cross-validation. The
cosine quadrature integrates the C^0 kernel |u.x| on the field's own grid, so
it is only accurate to about 1e-3; the spectral route is authoritative.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .grid import ScalarField, integrate
from .harmonics import (
    HarmonicSpectrum, analyze, box_eigenvalue, cosine_eigenvalue, evaluate, omega,
    radon_eigenvalue, synthesize,
)

CIRCLE_POINTS = 512


def _spectral(f, multiplier):
    if isinstance(f, HarmonicSpectrum):
        return f.apply_multiplier(multiplier)
    return synthesize(analyze(f).apply_multiplier(multiplier), f.grid)


def cosine_transform(f, backend: str = "spectral", threads: int = 1):
    """C f(u) = integral of |u.x| f(x) over the sphere."""
    if backend == "spectral":
        return _spectral(f, cosine_eigenvalue)
    if backend != "quadrature":
        raise ValueError(f"unknown backend {backend!r}")
    if not isinstance(f, ScalarField):
        raise TypeError("the quadrature backend needs a sampled field")
    g = f.grid
    vals = kernels.cosine_quadrature(g.nodes, g.nodes, g.weights * f.values, threads=threads)
    return ScalarField(g, vals)


def orthonormal_completion(u: np.ndarray):
    """Two unit vectors spanning u-perp, chosen deterministically per direction."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    axis = np.argmin(np.abs(u), axis=1)
    e = np.zeros_like(u)
    e[np.arange(len(u)), axis] = 1.0
    e1 = e - np.sum(e * u, axis=1)[:, None] * u
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(u, e1)
    return e1, e2


def great_circle_mean(spec: HarmonicSpectrum, directions: np.ndarray,
                      circle_points: int = CIRCLE_POINTS, threads: int = 1,
                      block: int = 256) -> np.ndarray:
    """Trapezoid mean of an S^2 expansion over the great circle orthogonal to each direction."""
    if circle_points < 256:
        raise ValueError("the great-circle rule needs at least 256 points")
    t = 2.0 * math.pi * np.arange(circle_points) / circle_points
    c, s = np.cos(t), np.sin(t)
    spec = spec.trimmed()
    out = np.empty(len(directions))
    for lo in range(0, len(directions), block):
        hi = min(lo + block, len(directions))
        e1, e2 = orthonormal_completion(directions[lo:hi])
        pts = c[None, :, None] * e1[:, None, :] + s[None, :, None] * e2[:, None, :]
        vals = evaluate(spec, pts.reshape(-1, 3), threads=threads)
        out[lo:hi] = vals.reshape(hi - lo, circle_points).mean(axis=1)
    return out


def radon_transform(f, backend: str = "spectral", circle_points: int = CIRCLE_POINTS,
                    threads: int = 1):
    """R f(u): mean of f over the great subsphere orthogonal to u."""
    if backend == "spectral":
        return _spectral(f, radon_eigenvalue)
    if backend != "quadrature":
        raise ValueError(f"unknown backend {backend!r}")
    if not isinstance(f, ScalarField):
        raise TypeError("the quadrature backend needs a sampled field")
    if f.grid.n != 3:
        raise ValueError("Radon quadrature is implemented for n=3 only")
    spec = analyze(f)
    vals = great_circle_mean(spec, f.grid.nodes, circle_points, threads)
    return ScalarField(f.grid, vals)


def box_operator(f):
    """Laplacian + (n-1), applied spectrally."""
    return _spectral(f, box_eigenvalue)


def box_cosine_radon_defect(spec: HarmonicSpectrum) -> float:
    """Largest coefficient gap in  box(C f) = 2(n-1) omega_{n-1} R f."""
    lhs = box_operator(cosine_transform(spec))
    rhs = radon_transform(spec) * (2.0 * (spec.n - 1) * omega(spec.n - 1))
    return float(np.max(np.abs(lhs.coeffs - rhs.coeffs)))


def self_adjointness_defect(f: ScalarField, g: ScalarField, transform: str = "radon",
                            backend: str = "spectral") -> float:
    """|int f T g - int g T f| for T the Radon or cosine transform."""
    op = {"radon": radon_transform, "cosine": cosine_transform}[transform]
    return abs(integrate(f * op(g, backend)) - integrate(g * op(f, backend)))
