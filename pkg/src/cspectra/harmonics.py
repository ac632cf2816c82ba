"""Real spherical harmonics, closed-form eigenvalue tables and Sobolev norms.

Coefficients are stored flat, degree by degree, with ``l = 1..N(n, k)`` inside
each degree. On S^2 the order inside degree k is::

    l = 1        -> m = 0
    l = 2m       -> P_k^m(cos theta) cos(m phi)
    l = 2m + 1   -> P_k^m(cos theta) sin(m phi)

and on S^1 it is ``1/sqrt(2 pi)`` for k = 0, then ``cos(k phi)/sqrt(pi)``
(l=1) and ``sin(k phi)/sqrt(pi)`` (l=2). Every basis function has unit L^2
norm with respect to surface measure. For n >= 4 only the coefficient
algebra is available (no grid transforms).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BandLimitError, GridMismatchError
from .grid import ScalarField, SphereGrid


# ---------------------------------------------------------------------------
# closed forms


def omega(k: int) -> float:
    """Volume of the k-dimensional unit ball."""
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def dim_harmonic(n: int, k: int) -> int:
    """N(n, k) = (2k+n-2)/(k+n-2) * C(k+n-2, k), the dimension of degree-k harmonics."""
    if n < 2 or k < 0:
        raise ValueError(f"need n >= 2 and k >= 0, got n={n}, k={k}")
    if k == 0:
        return 1
    # exact integer form of the same expression
    num = (2 * k + n - 2) * math.comb(k + n - 2, k)
    q, r = divmod(num, k + n - 2)
    assert r == 0
    return q


def laplace_eigenvalue(n: int, k: int) -> float:
    return -float(k * (k + n - 2))


def box_eigenvalue(n: int, k: int) -> float:
    """Eigenvalue of Laplacian + (n-1) on degree k."""
    return float((n - 1) - k * (k + n - 2))


def radon_eigenvalue(n: int, k: int) -> float:
    """Funk transform multiplier v_{k,n}."""
    if n < 3:
        raise ValueError(f"radon eigenvalues need n >= 3, got {n}")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k % 2:
        return 0.0
    if k == 0:
        return 1.0
    val = 1.0
    # 1*3*...*(k-1) / ((n-1)(n+1)...(n+k-3)), paired termwise against underflow
    for j in range(k // 2):
        val *= (2 * j + 1) / (n - 1 + 2 * j)
    return -val if (k // 2) % 2 else val


def cosine_eigenvalue(n: int, k: int) -> float:
    """Cosine transform multiplier w_{k,n}, including the omega_{n-1} factor."""
    if n < 2:
        raise ValueError(f"cosine eigenvalues need n >= 2, got {n}")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k % 2:
        return 0.0
    w = omega(n - 1)
    if k == 0:
        return 2.0 * w
    if k == 2:
        return 2.0 * w / (n + 1)
    val = 2.0 / (n + 1)
    # 2*1*3*...*(k-3) / ((n+1)(n+3)...(n+k-1))
    for j in range(1, k // 2):
        val *= (2 * j - 1) / (n + 1 + 2 * j)
    sign = -1.0 if ((k - 2) // 2) % 2 else 1.0
    return sign * w * val


# ---------------------------------------------------------------------------
# spectra


@lru_cache(maxsize=64)
def _degree_offsets(n: int, L: int) -> np.ndarray:
    dims = [dim_harmonic(n, k) for k in range(L + 1)]
    off = np.zeros(L + 2, dtype=np.int64)
    off[1:] = np.cumsum(dims)
    off.setflags(write=False)
    return off


@lru_cache(maxsize=64)
def degree_of_index(n: int, L: int) -> np.ndarray:
    off = _degree_offsets(n, L)
    deg = np.repeat(np.arange(L + 1), np.diff(off))
    deg.setflags(write=False)
    return deg


@lru_cache(maxsize=64)
def _order_layout(n: int, L: int):
    """(m, is_sin) for every flat index on S^1 / S^2."""
    deg = degree_of_index(n, L)
    off = _degree_offsets(n, L)
    l = np.arange(len(deg)) - off[deg] + 1
    if n == 3:
        m = l // 2
        is_sin = (l % 2 == 1) & (l > 1)
    elif n == 2:
        m = deg.copy()
        is_sin = l == 2
    else:
        raise ValueError("order layout exists only for n in (2, 3)")
    return m, is_sin


@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    """Coefficients of a function on S^{n-1} in the real orthonormal basis."""

    n: int
    L: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.n < 2 or self.L < 0:
            raise ValueError(f"invalid spectrum shape n={self.n}, L={self.L}")
        c = np.asarray(self.coeffs, dtype=float)
        expected = int(_degree_offsets(self.n, self.L)[-1])
        if c.shape != (expected,):
            raise GridMismatchError(
                f"n={self.n}, L={self.L} needs {expected} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, n: int, L: int) -> "HarmonicSpectrum":
        return cls(n, L, np.zeros(int(_degree_offsets(n, L)[-1])))

    @classmethod
    def basis(cls, n: int, L: int, k: int, l: int) -> "HarmonicSpectrum":
        s = cls.zeros(n, L)
        c = s.coeffs.copy()
        c[s.index(k, l)] = 1.0
        return cls(n, L, c)

    @classmethod
    def constant(cls, n: int, L: int, value: float) -> "HarmonicSpectrum":
        """Spectrum of the constant function ``value``."""
        c = np.zeros(int(_degree_offsets(n, L)[-1]))
        area = n * omega(n)
        c[0] = value * math.sqrt(area)
        return cls(n, L, c)

    @classmethod
    def random(cls, n: int, L: int, rng: np.random.Generator, degrees=None,
               decay: float = 0.0) -> "HarmonicSpectrum":
        """Gaussian coefficients on the chosen degrees, scaled by (1+k)^-decay."""
        deg = degree_of_index(n, L)
        c = rng.standard_normal(len(deg)) * (1.0 + deg) ** (-decay)
        if degrees is not None:
            c = np.where(np.isin(deg, list(degrees)), c, 0.0)
        return cls(n, L, c)

    # indexing ---------------------------------------------------------------
    def index(self, k: int, l: int) -> int:
        if not 0 <= k <= self.L:
            raise IndexError(f"degree {k} outside 0..{self.L}")
        N = dim_harmonic(self.n, k)
        if not 1 <= l <= N:
            raise IndexError(f"order {l} outside 1..{N} for degree {k}")
        return int(_degree_offsets(self.n, self.L)[k]) + l - 1

    def __getitem__(self, kl) -> float:
        k, l = kl
        return float(self.coeffs[self.index(k, l)])

    def degree(self, k: int) -> np.ndarray:
        off = _degree_offsets(self.n, self.L)
        return self.coeffs[off[k]:off[k + 1]]

    @property
    def degrees(self) -> np.ndarray:
        return degree_of_index(self.n, self.L)

    # algebra ----------------------------------------------------------------
    def _check(self, other: "HarmonicSpectrum"):
        if (other.n, other.L) != (self.n, self.L):
            raise GridMismatchError("spectra have different (n, L)")

    def __add__(self, other):
        self._check(other)
        return HarmonicSpectrum(self.n, self.L, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return HarmonicSpectrum(self.n, self.L, self.coeffs - other.coeffs)

    def __mul__(self, a: float):
        return HarmonicSpectrum(self.n, self.L, self.coeffs * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return HarmonicSpectrum(self.n, self.L, -self.coeffs)

    def apply_multiplier(self, func) -> "HarmonicSpectrum":
        """Multiply degree k by ``func(n, k)``."""
        table = np.array([func(self.n, k) for k in range(self.L + 1)])
        return HarmonicSpectrum(self.n, self.L, self.coeffs * table[self.degrees])

    def with_degrees(self, keep) -> "HarmonicSpectrum":
        mask = np.isin(self.degrees, list(keep))
        return HarmonicSpectrum(self.n, self.L, np.where(mask, self.coeffs, 0.0))

    def truncate(self, L: int) -> "HarmonicSpectrum":
        if L > self.L:
            c = np.zeros(int(_degree_offsets(self.n, L)[-1]))
            c[:len(self.coeffs)] = self.coeffs
            return HarmonicSpectrum(self.n, L, c)
        return HarmonicSpectrum(self.n, L, self.coeffs[:int(_degree_offsets(self.n, L)[-1])].copy())

    def trimmed(self, tol: float = 1e-14) -> "HarmonicSpectrum":
        """Drop trailing degrees whose coefficients are all below ``tol * max(1, norm)``."""
        cut = tol * max(1.0, self.norm())
        peak = np.zeros(self.L + 1)
        np.maximum.at(peak, self.degrees, np.abs(self.coeffs))
        live = np.nonzero(peak > cut)[0]
        return self.truncate(int(live[-1]) if live.size else 0)

    def energies(self) -> np.ndarray:
        """||pi_k f||_2^2 for k = 0..L."""
        return np.bincount(self.degrees, weights=self.coeffs ** 2, minlength=self.L + 1)

    def norm(self) -> float:
        return float(math.sqrt(np.sum(self.coeffs ** 2)))

    def mean(self) -> float:
        """The constant value of pi_0 f."""
        return float(self.coeffs[0] / math.sqrt(self.n * omega(self.n)))

    def is_even(self, tol: float = 1e-10) -> bool:
        odd = self.coeffs[self.degrees % 2 == 1]
        return bool(odd.size == 0 or np.max(np.abs(odd)) <= tol)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        deg = self.degrees
        off = _degree_offsets(self.n, self.L)
        rows = [[int(k), int(i - off[k] + 1), float(v)]
                for i, (k, v) in enumerate(zip(deg, self.coeffs))]
        return {"n": self.n, "L": self.L, "coeffs": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "HarmonicSpectrum":
        spec = cls.zeros(int(d["n"]), int(d["L"]))
        c = spec.coeffs.copy()
        for k, l, v in d["coeffs"]:
            c[spec.index(int(k), int(l))] = float(v)
        return cls(spec.n, spec.L, c)

    @classmethod
    def from_json(cls, text: str) -> "HarmonicSpectrum":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SobolevIndex:
    s: float

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError(f"Sobolev order must be >= 0, got {self.s}")


def sobolev_norm(spec: HarmonicSpectrum, s) -> float:
    """(sum_k (1 + k^2)^s ||pi_k f||^2)^(1/2)."""
    s = s.s if isinstance(s, SobolevIndex) else SobolevIndex(float(s)).s
    k = np.arange(spec.L + 1, dtype=float)
    return float(math.sqrt(np.sum((1.0 + k * k) ** s * spec.energies())))


# ---------------------------------------------------------------------------
# associated Legendre functions


def legendre_table(L: int, x: np.ndarray, derivatives: int = 0):
    """Orthonormal associated Legendre functions on S^2 at cos(theta) = x.

    Returns arrays of shape (L+1, L+1, len(x)) indexed [k, m, node], zero for
    m > k, such that P[k, m] * cos(m phi) (and sin for m > 0) has unit L^2
    norm on S^2. With ``derivatives`` = 1 or 2 also returns d/dtheta and
    d^2/dtheta^2 from the analytic recurrence; x = +-1 is not allowed then.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    npts = x.shape[0]
    P = np.zeros((L + 1, L + 1, npts))
    # 4*pi-normalized recurrence, rescaled at the end
    P[0, 0] = 1.0
    for m in range(1, L + 1):
        f = math.sqrt(3.0) if m == 1 else math.sqrt((2 * m + 1) / (2.0 * m))
        P[m, m] = f * s * P[m - 1, m - 1]
    for m in range(0, L):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        for k in range(m + 2, L + 1):
            a = math.sqrt((2 * k - 1) * (2 * k + 1) / ((k - m) * (k + m)))
            b = math.sqrt((2 * k + 1) * (k + m - 1) * (k - m - 1)
                          / ((k - m) * (k + m) * (2 * k - 3)))
            P[k, m] = a * x * P[k - 1, m] - b * P[k - 2, m]
    P /= math.sqrt(4.0 * math.pi)
    if derivatives == 0:
        return P
    if np.any(s == 0.0):
        raise ValueError("derivative tables are undefined at the poles")
    dP = np.zeros_like(P)
    kk = np.arange(L + 1)[:, None]
    mm = np.arange(L + 1)[None, :]
    with np.errstate(invalid="ignore"):
        c = np.sqrt(np.where(kk > 0, (2 * kk + 1) / np.maximum(2 * kk - 1, 1), 0.0)
                    * np.maximum(kk * kk - mm * mm, 0))
    c = np.where(mm <= kk, c, 0.0)
    dP[:] = kk[..., None] * x * P
    dP[1:] -= c[1:, :, None] * P[:-1]
    dP /= s
    if derivatives == 1:
        return P, dP
    cot = x / s
    lam = (kk * (kk + 1))[..., None] - (mm * mm)[..., None] / (s * s)
    d2P = -cot * dP - lam * P
    d2P = np.where((mm <= kk)[..., None], d2P, 0.0)
    return P, dP, d2P


@lru_cache(maxsize=8)
def _s2_tables(resolution: int):
    from .grid import build_grid
    g = build_grid(3, resolution)
    L = g.max_degree
    tabs = legendre_table(L, np.cos(g.theta), derivatives=2)
    for t in tabs:
        t.setflags(write=False)
    return tabs


# ---------------------------------------------------------------------------
# layout conversion


def to_order_arrays(spec: HarmonicSpectrum):
    """Split a spectrum into cosine/sine arrays (a, b).

    On S^2 these have shape (L+1, L+1) indexed [k, m]; on S^1 shape (L+1,).
    """
    m, is_sin = _order_layout(spec.n, spec.L)
    deg = spec.degrees
    if spec.n == 3:
        a = np.zeros((spec.L + 1, spec.L + 1))
        b = np.zeros((spec.L + 1, spec.L + 1))
        a[deg[~is_sin], m[~is_sin]] = spec.coeffs[~is_sin]
        b[deg[is_sin], m[is_sin]] = spec.coeffs[is_sin]
    else:
        a = np.zeros(spec.L + 1)
        b = np.zeros(spec.L + 1)
        a[deg[~is_sin]] = spec.coeffs[~is_sin]
        b[deg[is_sin]] = spec.coeffs[is_sin]
        a[0] /= math.sqrt(2.0 * math.pi)
        a[1:] /= math.sqrt(math.pi)
        b[1:] /= math.sqrt(math.pi)
    return a, b


def from_order_arrays(n: int, L: int, a: np.ndarray, b: np.ndarray) -> HarmonicSpectrum:
    """Inverse of :func:`to_order_arrays`; for S^1 (a, b) are plain Fourier amplitudes."""
    m, is_sin = _order_layout(n, L)
    deg = degree_of_index(n, L)
    c = np.zeros(len(deg))
    if n == 3:
        c[~is_sin] = a[deg[~is_sin], m[~is_sin]]
        c[is_sin] = b[deg[is_sin], m[is_sin]]
    else:
        scale_a = np.where(np.arange(L + 1) == 0, math.sqrt(2.0 * math.pi), math.sqrt(math.pi))
        c[~is_sin] = (a * scale_a)[deg[~is_sin]]
        c[is_sin] = (b * math.sqrt(math.pi))[deg[is_sin]]
    return HarmonicSpectrum(n, L, c)


# ---------------------------------------------------------------------------
# grid transforms


def _check_degree(L: int, grid: SphereGrid):
    if 2 * L > grid.exactness_degree + 1 or L > grid.max_degree:
        raise BandLimitError(
            f"degree {L} exceeds what a resolution-{grid.resolution} grid analyzes exactly")


def analyze(field: ScalarField, L: int | None = None) -> HarmonicSpectrum:
    """Quadrature projection onto degrees 0..L (default: the grid's maximum)."""
    grid = field.grid
    L = grid.max_degree if L is None else int(L)
    _check_degree(L, grid)
    dphi = 2.0 * math.pi / grid.n_phi
    if grid.n == 2:
        F = np.fft.rfft(field.values) * dphi
        a = F.real[:L + 1] / math.pi
        b = -F.imag[:L + 1] / math.pi
        a[0] /= 2.0
        return from_order_arrays(2, L, a, b)
    T = grid.resolution
    V = field.values.reshape(T, grid.n_phi)
    F = np.fft.rfft(V, axis=1) * dphi
    wt = grid.theta_weights[:, None]
    C = F.real[:, :L + 1] * wt
    S = -F.imag[:, :L + 1] * wt
    P = _s2_tables(T)[0][:L + 1, :L + 1]
    a = np.einsum("kmi,im->km", P, C)
    b = np.einsum("kmi,im->km", P, S)
    b[:, 0] = 0.0
    return from_order_arrays(3, L, a, b)


def _ring_synthesis(A: np.ndarray, B: np.ndarray, n_phi: int) -> np.ndarray:
    """sum_m A_m cos(m phi_j) + B_m sin(m phi_j) along the last axis."""
    M = A.shape[-1]
    X = np.zeros(A.shape[:-1] + (n_phi // 2 + 1,), dtype=complex)
    X[..., :M] = (A - 1j * B) * (n_phi / 2.0)
    X[..., 0] = A[..., 0] * n_phi
    return np.fft.irfft(X, n=n_phi, axis=-1)


def _synth_s2(a, b, P, n_phi, dphi_order=0):
    A = np.einsum("km,kmi->im", a, P)
    B = np.einsum("km,kmi->im", b, P)
    m = np.arange(a.shape[1])[None, :]
    if dphi_order == 1:
        A, B = m * B, -m * A
    elif dphi_order == 2:
        A, B = -m * m * A, -m * m * B
    return _ring_synthesis(A, B, n_phi).ravel()


def _prepare(spec: HarmonicSpectrum, grid: SphereGrid):
    if spec.n != grid.n:
        raise GridMismatchError(f"spectrum n={spec.n} vs grid n={grid.n}")
    if spec.L > grid.max_degree:
        raise BandLimitError(f"spectrum degree {spec.L} exceeds grid maximum {grid.max_degree}")
    return to_order_arrays(spec)


def synthesize(spec: HarmonicSpectrum, grid: SphereGrid) -> ScalarField:
    a, b = _prepare(spec, grid)
    if grid.n == 2:
        return ScalarField(grid, _ring_synthesis(a, b, grid.n_phi))
    P = _s2_tables(grid.resolution)[0][:spec.L + 1, :spec.L + 1]
    return ScalarField(grid, _synth_s2(a, b, P, grid.n_phi))


def synthesize_derivatives(spec: HarmonicSpectrum, grid: SphereGrid) -> dict:
    """Values and coordinate derivatives up to order two at every node.

    Keys on S^2: f, t, tt, p, tp, pp (t = colatitude, p = longitude).
    Keys on S^1: f, p, pp.
    """
    a, b = _prepare(spec, grid)
    if grid.n == 2:
        k = np.arange(spec.L + 1)
        return {
            "f": _ring_synthesis(a, b, grid.n_phi),
            "p": _ring_synthesis(k * b, -k * a, grid.n_phi),
            "pp": _ring_synthesis(-k * k * a, -k * k * b, grid.n_phi),
        }
    P, dP, d2P = (t[:spec.L + 1, :spec.L + 1] for t in _s2_tables(grid.resolution))
    nphi = grid.n_phi
    return {
        "f": _synth_s2(a, b, P, nphi),
        "t": _synth_s2(a, b, dP, nphi),
        "tt": _synth_s2(a, b, d2P, nphi),
        "p": _synth_s2(a, b, P, nphi, 1),
        "tp": _synth_s2(a, b, dP, nphi, 1),
        "pp": _synth_s2(a, b, P, nphi, 2),
    }


def node_trig(grid: SphereGrid):
    """(sin theta, cos theta) per node on S^2."""
    st = np.repeat(np.sin(grid.theta), grid.n_phi)
    ct = np.repeat(np.cos(grid.theta), grid.n_phi)
    return st, ct


def evaluate(spec: HarmonicSpectrum, points: np.ndarray, threads: int = 1) -> np.ndarray:
    """Evaluate a spectrum at arbitrary unit vectors (S^2) or angles/2-vectors (S^1)."""
    points = np.asarray(points, dtype=float)
    a, b = to_order_arrays(spec)
    if spec.n == 2:
        ang = points if points.ndim == 1 else np.arctan2(points[:, 1], points[:, 0])
        k = np.arange(spec.L + 1)
        kp = np.multiply.outer(ang, k)
        return np.cos(kp) @ a + np.sin(kp) @ b
    if spec.n != 3:
        raise ValueError("point evaluation exists only for n in (2, 3)")
    return kernels.sh_evaluate(a, b, points, threads=threads)


def analysis_residual(field: ScalarField, spec: HarmonicSpectrum | None = None) -> float:
    """Sup-norm gap between a field and the synthesis of its analysis."""
    spec = analyze(field) if spec is None else spec
    return float(np.max(np.abs(synthesize(spec, field.grid).values - field.values)))


def require_band_limited(field: ScalarField, tol: float = 1e-6) -> HarmonicSpectrum:
    """Analyze ``field``, refusing data that the grid cannot represent.

    Two symptoms are checked: a synthesis residual (content the analysis
    missed) and amplitude in the top two degrees (a spectrum that has not
    decayed by the grid's maximum degree). The zonal part interpolates
    exactly at the Gauss nodes, so the residual alone misses it.
    """
    spec = analyze(field)
    res = analysis_residual(field, spec)
    scale = max(1.0, field.sup())
    if res > tol * scale:
        raise BandLimitError(f"field is not band-limited at L={spec.L}: residual {res:.3e}")
    tail = math.sqrt(float(np.sum(spec.energies()[-2:])))
    if tail > tol * scale:
        raise BandLimitError(f"field is not band-limited at L={spec.L}: top-degree amplitude {tail:.3e}")
    return spec
