import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cspectra.errors import BandLimitError, GridMismatchError
from cspectra.grid import ScalarField, build_grid, integrate
from cspectra.harmonics import (
    HarmonicSpectrum, SobolevIndex, analysis_residual, analyze, box_eigenvalue,
    cosine_eigenvalue, degree_of_index, dim_harmonic, evaluate, from_order_arrays,
    legendre_table, omega, radon_eigenvalue, require_band_limited, sobolev_norm, synthesize,
    synthesize_derivatives, to_order_arrays,
)


# --- independent oracles ---------------------------------------------------

def gegenbauer(k, lam, t):
    """C_k^lam(t) by the three-term recurrence."""
    c0, c1 = 1.0, 2.0 * lam * t
    if k == 0:
        return c0
    for j in range(2, k + 1):
        c0, c1 = c1, (2.0 * t * (j + lam - 1) * c1 - (j + 2 * lam - 2) * c0) / j
    return c1


def legendre_n(n, k, t):
    """Legendre polynomial of dimension n, normalized to 1 at t = 1."""
    lam = (n - 2) / 2.0
    return gegenbauer(k, lam, t) / gegenbauer(k, lam, 1.0)


def funk_hecke(n, k, phi, points=200):
    """(n-1) omega_{n-1} int_0^pi phi(cos a) P_k(cos a) sin^{n-2} a da, split at pi/2."""
    x, w = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for lo, hi in ((0.0, math.pi / 2), (math.pi / 2, math.pi)):
        a = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        vals = [phi(math.cos(ai)) * legendre_n(n, k, math.cos(ai)) * math.sin(ai) ** (n - 2)
                for ai in a]
        total += 0.5 * (hi - lo) * float(np.dot(w, vals))
    return (n - 1) * omega(n - 1) * total


def test_omega_small_cases():
    assert omega(1) == pytest.approx(2.0, rel=1e-15)
    assert omega(2) == pytest.approx(math.pi, rel=1e-15)
    assert omega(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 7])
@pytest.mark.parametrize("k", [0, 1, 2, 3, 6])
def test_dim_harmonic_binomial(n, k):
    expected = math.comb(n + k - 1, k) - (math.comb(n + k - 3, k - 2) if k >= 2 else 0)
    assert dim_harmonic(n, k) == expected


def test_closed_form_eigenvalues_n3():
    assert radon_eigenvalue(3, 2) == -0.5
    assert radon_eigenvalue(3, 4) == 0.375
    assert cosine_eigenvalue(3, 2) == pytest.approx(math.pi / 2, rel=1e-15)
    assert cosine_eigenvalue(3, 4) == pytest.approx(-math.pi / 12, rel=1e-15)
    assert cosine_eigenvalue(3, 0) == pytest.approx(2 * math.pi, rel=1e-15)


@pytest.mark.parametrize("n", [3, 4, 5, 8])
@pytest.mark.parametrize("k", [0, 1, 2, 3, 4, 6, 10, 12])
def test_radon_matches_gegenbauer_at_zero(n, k):
    assert radon_eigenvalue(n, k) == pytest.approx(legendre_n(n, k, 0.0), abs=1e-13)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("k", [0, 1, 2, 4, 6, 8])
def test_cosine_matches_funk_hecke(n, k):
    if n == 2:
        # on S^1 the kernel integral is direct: int |cos t| cos(kt) dt
        t = np.linspace(0, 2 * math.pi, 200001)[:-1]
        ref = float(np.mean(np.abs(np.cos(t)) * np.cos(k * t)) * 2 * math.pi)
        assert cosine_eigenvalue(2, k) == pytest.approx(ref, abs=1e-8)
        return
    assert cosine_eigenvalue(n, k) == pytest.approx(funk_hecke(n, k, abs), abs=1e-12)


@given(n=st.integers(3, 8), k2=st.integers(0, 100))
def test_box_cosine_radon_per_degree(n, k2):
    k = 2 * k2
    lhs = box_eigenvalue(n, k) * cosine_eigenvalue(n, k)
    rhs = 2 * (n - 1) * omega(n - 1) * radon_eigenvalue(n, k)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_radon_needs_n3():
    with pytest.raises(ValueError):
        radon_eigenvalue(2, 2)


# --- spectra -----------------------------------------------------------------

def test_degree_layout_counts():
    for n in (2, 3):
        deg = degree_of_index(n, 7)
        for k in range(8):
            assert np.sum(deg == k) == dim_harmonic(n, k)


def test_spectrum_json_roundtrip(rng):
    s = HarmonicSpectrum.random(3, 6, rng)
    t = HarmonicSpectrum.from_json(s.to_json())
    assert np.array_equal(s.coeffs, t.coeffs) and t.L == 6


@given(L=st.integers(0, 8), seed=st.integers(0, 2 ** 31))
def test_order_arrays_roundtrip(L, seed):
    for n in (2, 3):
        s = HarmonicSpectrum.random(n, L, np.random.default_rng(seed))
        a, b = to_order_arrays(s)
        assert np.allclose(from_order_arrays(n, L, a, b).coeffs, s.coeffs, rtol=1e-15, atol=0)


def test_spectrum_arithmetic_and_norm(rng):
    a = HarmonicSpectrum.random(3, 5, rng)
    b = HarmonicSpectrum.random(3, 5, rng)
    assert np.allclose((a + b - b).coeffs, a.coeffs)
    assert (a * 2.0).norm() == pytest.approx(2 * a.norm())
    assert float(np.sum(a.energies())) == pytest.approx(a.norm() ** 2)
    with pytest.raises(GridMismatchError):
        a + HarmonicSpectrum.random(3, 4, rng)


def test_constant_spectrum_mean():
    s = HarmonicSpectrum.constant(3, 4, 2.5)
    assert s.mean() == pytest.approx(2.5)
    g = build_grid(3, 8)
    assert np.allclose(synthesize(s, g).values, 2.5)


def test_sobolev_norm_weights(rng):
    s = HarmonicSpectrum.basis(3, 4, 3, 2)
    assert sobolev_norm(s, SobolevIndex(0)) == pytest.approx(1.0)
    assert sobolev_norm(s, SobolevIndex(1)) == pytest.approx(math.sqrt(1 + 3 * 3))


# --- transforms on the grid ------------------------------------------------

@pytest.mark.parametrize("n", [2, 3])
def test_basis_orthonormal(n):
    g = build_grid(n, 12)
    L = g.max_degree
    k = degree_of_index(n, L)
    B = np.stack([synthesize(HarmonicSpectrum.basis(n, L, int(kk), l), g).values
                  for kk, l in zip(k, _orders(n, L))])
    gram = (B * g.weights) @ B.T
    assert np.max(np.abs(gram - np.eye(len(B)))) < 1e-13


def _orders(n, L):
    out = []
    for k in range(L + 1):
        out.extend(range(1, dim_harmonic(n, k) + 1))
    return out


@pytest.mark.parametrize("n", [2, 3])
def test_analyze_synthesize_roundtrip(n, rng):
    g = build_grid(n, 20)
    s = HarmonicSpectrum.random(n, g.max_degree, rng)
    back = analyze(synthesize(s, g))
    assert np.max(np.abs(back.coeffs - s.coeffs)) < 1e-13


def test_parseval(s2_small, rng):
    s = HarmonicSpectrum.random(3, 10, rng)
    f = synthesize(s, s2_small)
    assert integrate(f * f) == pytest.approx(s.norm() ** 2, rel=1e-13)


def test_known_harmonic_values(s2_small):
    # Y_{1,0} = sqrt(3/4pi) z ; Y_{2,0} = sqrt(5/16pi)(3z^2-1)
    z = s2_small.nodes[:, 2]
    y10 = synthesize(HarmonicSpectrum.basis(3, 2, 1, 1), s2_small).values
    y20 = synthesize(HarmonicSpectrum.basis(3, 2, 2, 1), s2_small).values
    assert np.allclose(np.abs(y10), math.sqrt(3 / (4 * math.pi)) * np.abs(z), atol=1e-14)
    assert np.allclose(np.abs(y20), math.sqrt(5 / (16 * math.pi)) * np.abs(3 * z * z - 1),
                       atol=1e-14)


def test_legendre_derivative_tables_fd():
    x = np.linspace(-0.9, 0.9, 7)
    th = np.arccos(x)
    P, dP, d2P = legendre_table(6, x, derivatives=2)
    eps = 1e-5
    Pp = legendre_table(6, np.cos(th + eps))
    Pm = legendre_table(6, np.cos(th - eps))
    assert np.max(np.abs((Pp - Pm) / (2 * eps) - dP)) < 1e-7
    assert np.max(np.abs((Pp - 2 * P + Pm) / eps ** 2 - d2P)) < 1e-4


def test_synthesize_derivatives_against_fd(s2_small, rng):
    s = HarmonicSpectrum.random(3, 8, rng)
    d = synthesize_derivatives(s, s2_small)
    pts = s2_small.nodes
    th = np.arccos(np.clip(pts[:, 2], -1, 1))
    ph = np.arctan2(pts[:, 1], pts[:, 0])

    def at(t, p):
        xyz = np.column_stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        return evaluate(s, xyz)

    e = 1e-5
    assert np.max(np.abs((at(th + e, ph) - at(th - e, ph)) / (2 * e) - d["t"])) < 1e-7
    assert np.max(np.abs((at(th, ph + e) - at(th, ph - e)) / (2 * e) - d["p"])) < 1e-7
    mixed = (at(th + e, ph + e) - at(th + e, ph - e) - at(th - e, ph + e)
             + at(th - e, ph - e)) / (4 * e * e)
    assert np.max(np.abs(mixed - d["tp"])) < 1e-4


def test_s1_derivatives(s1):
    s = HarmonicSpectrum.basis(2, 3, 3, 1)  # cos(3t)/sqrt(pi)
    d = synthesize_derivatives(s, s1)
    t = s1.phi
    assert np.allclose(d["f"], np.cos(3 * t) / math.sqrt(math.pi), atol=1e-14)
    assert np.allclose(d["pp"], -9 * np.cos(3 * t) / math.sqrt(math.pi), atol=1e-12)


def test_evaluate_matches_synthesis(s2_small, rng, impl, monkeypatch):
    from cspectra import kernels
    monkeypatch.setattr(kernels, "_impl", impl)
    s = HarmonicSpectrum.random(3, 12, rng)
    assert np.max(np.abs(evaluate(s, s2_small.nodes) - synthesize(s, s2_small).values)) < 1e-13


def test_require_band_limited(s2_small):
    z = s2_small.nodes[:, 2]
    ok = ScalarField(s2_small, z ** 4)
    require_band_limited(ok)
    assert analysis_residual(ok) < 1e-13
    rough = ScalarField(s2_small, np.abs(z))
    with pytest.raises(BandLimitError):
        require_band_limited(rough)


def test_synthesize_rejects_too_high_degree():
    g = build_grid(3, 8)
    with pytest.raises(BandLimitError):
        synthesize(HarmonicSpectrum.zeros(3, 8), g)
