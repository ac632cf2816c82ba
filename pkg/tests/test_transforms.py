import math

import numpy as np
import pytest

from cspectra import kernels
from cspectra.grid import ScalarField, build_grid, integrate
from cspectra.harmonics import HarmonicSpectrum, synthesize
from cspectra.transforms import (
    box_cosine_radon_defect, box_operator, cosine_transform, great_circle_mean,
    orthonormal_completion, radon_transform, self_adjointness_defect,
)


def unit_field(grid, L, seed):
    s = HarmonicSpectrum.random(grid.n, L, np.random.default_rng(seed))
    return synthesize(s * (1.0 / s.norm()), grid)


def test_radon_of_z_squared(s2_small):
    # mean of (x.e3)^2 over the great circle orthogonal to u is (1 - u_z^2)/2
    z = s2_small.nodes[:, 2]
    f = ScalarField(s2_small, z * z)
    expected = 0.5 * (1.0 - z * z)
    for backend in ("spectral", "quadrature"):
        assert np.max(np.abs(radon_transform(f, backend).values - expected)) < 1e-12


def test_cosine_of_constant(s2, s1):
    assert np.allclose(cosine_transform(ScalarField.constant(s2, 1.0)).values, 2 * math.pi)
    assert np.allclose(cosine_transform(ScalarField.constant(s1, 1.0)).values, 4.0)


def test_cosine_of_constant_quadrature(s2):
    q = cosine_transform(ScalarField.constant(s2, 1.0), backend="quadrature")
    assert np.max(np.abs(q.values - 2 * math.pi)) < 1e-3


def test_backends_agree_at_L12(s2, impl, monkeypatch):
    monkeypatch.setattr(kernels, "_impl", impl)
    f = unit_field(s2, 12, 3)
    r = np.max(np.abs(radon_transform(f).values - radon_transform(f, "quadrature").values))
    c = np.max(np.abs(cosine_transform(f).values - cosine_transform(f, "quadrature").values))
    assert r <= 1e-6
    assert c <= 1e-3


def test_spectral_accepts_spectrum_and_field(s2_small, rng):
    s = HarmonicSpectrum.random(3, 6, rng)
    a = radon_transform(s)
    b = radon_transform(synthesize(s, s2_small))
    assert np.allclose(synthesize(a, s2_small).values, b.values, atol=1e-13)


def test_quadrature_needs_a_field(rng):
    with pytest.raises(TypeError):
        radon_transform(HarmonicSpectrum.random(3, 4, rng), "quadrature")
    with pytest.raises(ValueError):
        radon_transform(ScalarField.constant(build_grid(2, 8), 1.0), "quadrature")
    with pytest.raises(ValueError):
        cosine_transform(ScalarField.constant(build_grid(3, 8), 1.0), "fft")


def test_orthonormal_completion(rng):
    u = rng.standard_normal((64, 3))
    u /= np.linalg.norm(u, axis=1)[:, None]
    e1, e2 = orthonormal_completion(u)
    for a, b in ((u, e1), (u, e2), (e1, e2)):
        assert np.max(np.abs(np.sum(a * b, axis=1))) < 1e-14
    assert np.allclose(np.linalg.norm(e1, axis=1), 1) and np.allclose(np.linalg.norm(e2, axis=1), 1)


def test_great_circle_point_count_guard(rng):
    with pytest.raises(ValueError):
        great_circle_mean(HarmonicSpectrum.random(3, 4, rng), np.eye(3), circle_points=64)


@pytest.mark.parametrize("transform", ["radon", "cosine"])
def test_self_adjoint(s2_small, transform):
    f, g = unit_field(s2_small, 8, 1), unit_field(s2_small, 8, 2)
    assert self_adjointness_defect(f, g, transform) < 1e-13


def test_box_cosine_radon_identity_on_spectra(rng):
    s = HarmonicSpectrum.random(3, 16, rng)
    assert box_cosine_radon_defect(s) < 1e-12


def test_box_operator_kills_linear(s2_small):
    f = ScalarField(s2_small, s2_small.nodes @ np.array([0.3, -0.2, 0.5]))
    # noise at the top analysis degree is amplified by |box| ~ L^2
    assert np.max(np.abs(box_operator(f).values)) < 1e-11


def test_cosine_of_linear_function_vanishes(s2_small):
    f = ScalarField(s2_small, s2_small.nodes[:, 0])
    assert np.max(np.abs(cosine_transform(f).values)) < 1e-13


def test_cosine_total_mass(s2_small, rng):
    # int C f = int f(x) int |u.x| du dx = 2 pi int f
    f = unit_field(s2_small, 6, 9) + 2.0
    assert integrate(cosine_transform(f)) == pytest.approx(2 * math.pi * integrate(f), rel=1e-13)
