"""Convex-body calculus on support functions sampled on S^1 and S^2.

For a support function h the matrix ``A[h] = hess h + h I`` (covariant
Hessian in the orthonormal frame (e_theta, e_phi)) drives everything: its
mixed determinants give surface-area densities, and positive definiteness
of A[h] certifies a C^2_+ body. Nodewise products and powers are re-analyzed
at the grid's maximum degree, with the energy in the two top degrees watched
as an aliasing guard.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AliasingError, BandLimitError, ConvexityError, GridMismatchError, PositivityError,
)
from .grid import ScalarField, SphereGrid, integrate
from .harmonics import (
    HarmonicSpectrum, analyze, cosine_eigenvalue, evaluate, from_order_arrays, node_trig,
    omega, require_band_limited, synthesize, synthesize_derivatives, to_order_arrays,
)

CERTIFY_REL = 1e-8
ALIAS_TOL = 1e-6
SYMMETRY_TOL = 1e-10
MAX_PERTURBATION = 0.05


# ---------------------------------------------------------------------------
# fields with geometric meaning


@dataclass(frozen=True, eq=False)
class HessianField:
    """Per-node symmetric (n-1)x(n-1) matrices A[f] in the frame (e_theta, e_phi)."""

    grid: SphereGrid
    matrices: np.ndarray

    def trace(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)

    def min_eigenvalue(self) -> np.ndarray:
        M = self.matrices
        if M.shape[1] == 1:
            return M[:, 0, 0].copy()
        a, b, c = M[:, 0, 0], M[:, 0, 1], M[:, 1, 1]
        return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)


@dataclass(frozen=True, eq=False)
class SupportField:
    """A support function certified convex: A[f] > 0 at every node."""

    field: ScalarField
    spectrum: HarmonicSpectrum
    min_A_eigenvalue: float

    @property
    def grid(self) -> SphereGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def n(self) -> int:
        return self.field.grid.n


@dataclass(frozen=True, eq=False)
class RadialField:
    field: ScalarField

    def __post_init__(self):
        if not np.all(self.field.values > 0.0):
            raise PositivityError("radial functions must be strictly positive")

    @property
    def grid(self) -> SphereGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def _as_field(f) -> ScalarField:
    if isinstance(f, (SupportField, RadialField)):
        return f.field
    if isinstance(f, ScalarField):
        return f
    raise TypeError(f"expected a field, got {type(f).__name__}")


def _spectrum_of(f) -> HarmonicSpectrum:
    if isinstance(f, SupportField):
        return f.spectrum
    return require_band_limited(_as_field(f))


# ---------------------------------------------------------------------------
# A[f] and derivatives


def _derivative_frame(spec: HarmonicSpectrum, grid: SphereGrid):
    """Function values, tangent gradient and covariant Hessian at every node."""
    d = synthesize_derivatives(spec, grid)
    if grid.n == 2:
        return d["f"], d["p"][:, None], d["pp"][:, None, None]
    st, ct = node_trig(grid)
    cot = ct / st
    grad = np.column_stack([d["t"], d["p"] / st])
    hess = np.empty((grid.size, 2, 2))
    hess[:, 0, 0] = d["tt"]
    hess[:, 0, 1] = hess[:, 1, 0] = (d["tp"] - cot * d["p"]) / st
    hess[:, 1, 1] = d["pp"] / (st * st) + cot * d["t"]
    return d["f"], grad, hess


def hessian_from_spectrum(spec: HarmonicSpectrum, grid: SphereGrid) -> HessianField:
    f, _, hess = _derivative_frame(spec, grid)
    A = hess + f[:, None, None] * np.eye(grid.n - 1)[None]
    return HessianField(grid, A)


def hessian_operator(f) -> HessianField:
    """A[f] = covariant Hessian + f * Identity at every grid node."""
    field_ = _as_field(f)
    return hessian_from_spectrum(_spectrum_of(f), field_.grid)


def _circle_c2_profile(a: np.ndarray, b: np.ndarray, t: np.ndarray) -> np.ndarray:
    k = np.arange(len(a))
    kt = np.multiply.outer(t, k)
    c, s = np.cos(kt), np.sin(kt)
    f = c @ a + s @ b
    d1 = s @ (-k * a) + c @ (k * b)
    d2 = c @ (-k * k * a) + s @ (-k * k * b)
    return np.abs(f) + np.abs(d1) + np.abs(d2)


def _circle_sup(a: np.ndarray, b: np.ndarray, candidates: int = 3) -> float:
    """Continuous sup of the S^1 profile: oversampled scan, then golden-section polish."""
    N = max(1024, 64 * len(a))
    t = np.arange(N) * (2.0 * np.pi / N)
    p = _circle_c2_profile(a, b, t)
    peaks = np.flatnonzero((p >= np.roll(p, 1)) & (p >= np.roll(p, -1)))
    best = float(np.max(p))
    h = 2.0 * np.pi / N
    g = 0.5 * (np.sqrt(5.0) - 1.0)
    for j in peaks[np.argsort(p[peaks])[::-1][:candidates]]:
        lo, hi = t[j] - h, t[j] + h
        x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
        p1, p2 = _circle_c2_profile(a, b, np.array([x1, x2]))
        while hi - lo > 1e-13:
            if p1 > p2:
                hi, x2, p2 = x2, x1, p1
                x1 = hi - g * (hi - lo)
                p1 = float(_circle_c2_profile(a, b, np.array([x1]))[0])
            else:
                lo, x1, p1 = x1, x2, p2
                x2 = lo + g * (hi - lo)
                p2 = float(_circle_c2_profile(a, b, np.array([x2]))[0])
        best = max(best, float(p1), float(p2))
    return best


def c2_proxy(spec: HarmonicSpectrum, grid: SphereGrid) -> float:
    """max of |f| + |grad f| + ||hess f||_op.

    On S^2 the max runs over grid nodes. On S^1 the profile is cheap to
    evaluate anywhere, so the continuous sup is used; it is rotation
    invariant and never below the node max.
    """
    f, grad, hess = _derivative_frame(spec, grid)
    gnorm = np.sqrt(np.sum(grad * grad, axis=1))
    if grid.n == 2:
        node_max = float(np.max(np.abs(f) + gnorm + np.abs(hess[:, 0, 0])))
        a, b = to_order_arrays(spec.truncate(grid.max_degree))
        return max(node_max, _circle_sup(a, b))
    a, b, c = hess[:, 0, 0], hess[:, 0, 1], hess[:, 1, 1]
    r = np.sqrt(0.25 * (a - c) ** 2 + b * b)
    hnorm = np.abs(0.5 * (a + c)) + r
    return float(np.max(np.abs(f) + gnorm + hnorm))


# ---------------------------------------------------------------------------
# certification and re-analysis


def reanalyze(values: np.ndarray, grid: SphereGrid) -> HarmonicSpectrum:
    """Analyze nodewise-computed values, refusing aliased results."""
    spec = analyze(ScalarField(grid, values))
    e = spec.energies()
    total = float(np.sum(e))
    if total > 0.0 and float(np.sum(e[-2:])) > ALIAS_TOL * total:
        raise AliasingError(
            f"top-degree energy fraction {np.sum(e[-2:]) / total:.2e} exceeds {ALIAS_TOL}")
    return spec


def certify_spectrum(spec: HarmonicSpectrum, grid: SphereGrid,
                     require_positive: bool = False) -> SupportField:
    f = synthesize(spec, grid)
    lam = hessian_from_spectrum(spec, grid).min_eigenvalue()
    lam_min = float(np.min(lam))
    threshold = CERTIFY_REL * max(1.0, float(np.max(f.values)))
    if lam_min < threshold:
        node = int(np.argmin(lam))
        raise ConvexityError(
            f"A[f] has eigenvalue {lam_min:.3e} < {threshold:.1e} at node {node}")
    if require_positive and not np.all(f.values > 0.0):
        raise PositivityError("support function must be positive (origin interior)")
    return SupportField(f, spec, lam_min)


def certify(f, require_positive: bool = False) -> SupportField:
    """Wrap a band-limited field as a SupportField or raise ConvexityError."""
    if isinstance(f, SupportField):
        if require_positive and not np.all(f.values > 0.0):
            raise PositivityError("support function must be positive (origin interior)")
        return f
    field_ = _as_field(f)
    spec = require_band_limited(field_)
    return certify_spectrum(spec, field_.grid, require_positive)


# ---------------------------------------------------------------------------
# mixed discriminants and volumes


def _mixed_det(mats) -> np.ndarray:
    if len(mats) == 1:
        return mats[0][:, 0, 0].copy()
    A, B = mats
    return 0.5 * (A[:, 0, 0] * B[:, 1, 1] + A[:, 1, 1] * B[:, 0, 0]
                  - 2.0 * A[:, 0, 1] * B[:, 0, 1])


def _identity(grid: SphereGrid) -> np.ndarray:
    return np.broadcast_to(np.eye(grid.n - 1), (grid.size, grid.n - 1, grid.n - 1))


def mixed_discriminant(fs) -> ScalarField:
    """Q(f_1, ..., f_{n-1}) at every node; symmetric and multilinear."""
    fields = [_as_field(f) for f in fs]
    grid = fields[0].grid
    if len(fields) != grid.n - 1:
        raise ValueError(f"n={grid.n} needs {grid.n - 1} arguments, got {len(fields)}")
    if any(f.grid is not grid for f in fields):
        raise GridMismatchError("arguments live on different grids")
    mats = [hessian_operator(f).matrices for f in fs]
    return ScalarField(grid, _mixed_det(mats))


def mixed_volume(fs) -> float:
    """V(f_1, ..., f_n) = (1/n) int f_1 Q(f_2, ..., f_n)."""
    fields = [_as_field(f) for f in fs]
    n = fields[0].grid.n
    if len(fields) != n:
        raise ValueError(f"n={n} needs {n} arguments, got {len(fields)}")
    return integrate(fields[0] * mixed_discriminant(fs[1:])) / n


def _check_i(n: int, i: int):
    if not 1 <= i <= n - 1:
        raise ValueError(f"i must lie in 1..{n - 1}, got {i}")


def q_i_values(base: HarmonicSpectrum, direction: HarmonicSpectrum, grid: SphereGrid,
               i: int) -> np.ndarray:
    """q_i(f, g): i-1 copies of f, one g and n-1-i copies of 1."""
    _check_i(grid.n, i)
    mats = [hessian_from_spectrum(base, grid).matrices] * (i - 1)
    mats += [hessian_from_spectrum(direction, grid).matrices]
    mats += [_identity(grid)] * (grid.n - 1 - i)
    return _mixed_det(mats)


def Q_i_values(spec: HarmonicSpectrum, grid: SphereGrid, i: int) -> np.ndarray:
    """Q_i(f): i copies of f and n-1-i copies of 1."""
    _check_i(grid.n, i)
    A = hessian_from_spectrum(spec, grid).matrices
    return _mixed_det([A] * i + [_identity(grid)] * (grid.n - 1 - i))


def mixed_area_density(f, i: int) -> ScalarField:
    field_ = _as_field(f)
    return ScalarField(field_.grid, Q_i_values(_spectrum_of(f), field_.grid, i))


def volume_i(f, i: int) -> float:
    """V_i(f): mixed volume with i copies of f and n-i copies of 1."""
    field_ = _as_field(f)
    n = field_.grid.n
    if not 0 <= i <= n:
        raise ValueError(f"i must lie in 0..{n}, got {i}")
    if i == 0:
        return omega(n)
    q = Q_i_values(_spectrum_of(f), field_.grid, i - 1) if i > 1 else np.ones(field_.grid.size)
    return integrate(field_ * q) / n


# ---------------------------------------------------------------------------
# projection, centroid and polar bodies


def spectral_rotate_2d(spec: HarmonicSpectrum, angle: float) -> HarmonicSpectrum:
    """Spectrum of theta -> f(theta - angle) on S^1."""
    a, b = to_order_arrays(spec)
    k = np.arange(spec.L + 1)
    c, s = np.cos(k * angle), np.sin(k * angle)
    return from_order_arrays(2, spec.L, a * c - b * s, a * s + b * c)


def _cosine_spectrum(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    return spec.apply_multiplier(cosine_eigenvalue)


def project_spectrum(spec: HarmonicSpectrum, grid: SphereGrid, i: int) -> HarmonicSpectrum:
    """Spectrum of Pi_i f, without certification."""
    if grid.n == 2:
        _check_i(2, i)
        # h(t - pi/2) + h(t + pi/2); equals 2 h(t - pi/2) for symmetric bodies
        return spectral_rotate_2d(spec, 0.5 * math.pi) + spectral_rotate_2d(spec, -0.5 * math.pi)
    q = reanalyze(Q_i_values(spec, grid, i), grid)
    return _cosine_spectrum(q) * 0.5


def project_i(f, i: int) -> SupportField:
    """i-th projection body: (1/2) C Q_i(f); on S^1 the rotate-and-double rule."""
    field_ = _as_field(f)
    return certify_spectrum(project_spectrum(_spectrum_of(f), field_.grid, i), field_.grid)


def mixed_projection(f1, f2) -> SupportField:
    """Pi(f_1, f_2) = (1/2) C Q(f_1, f_2) on S^2."""
    grid = _as_field(f1).grid
    if grid.n != 3:
        raise ValueError("the two-argument mixed projection is exposed for n=3 only")
    q = reanalyze(mixed_discriminant([f1, f2]).values, grid)
    return certify_spectrum(_cosine_spectrum(q) * 0.5, grid)


def centroid_body(rho) -> SupportField:
    """h_{Gamma K} = C(rho^{n+1})."""
    field_ = _as_field(rho)
    if not np.all(field_.values > 0.0):
        raise PositivityError("radial function must be strictly positive")
    grid = field_.grid
    spec = reanalyze(field_.values ** (grid.n + 1), grid)
    return certify_spectrum(_cosine_spectrum(spec), grid)


def polar_body(f) -> RadialField:
    """rho_{K*} = 1 / h_K."""
    field_ = _as_field(f)
    if not np.all(field_.values > 0.0):
        raise PositivityError("polar needs a strictly positive support function")
    return RadialField(ScalarField(field_.grid, 1.0 / field_.values))


def polar_support(rho) -> ScalarField:
    """Inverse of :func:`polar_body`: h_K = 1 / rho_{K*}."""
    field_ = _as_field(rho)
    if not np.all(field_.values > 0.0):
        raise PositivityError("radial function must be strictly positive")
    return ScalarField(field_.grid, 1.0 / field_.values)


def theta_spectrum(spec: HarmonicSpectrum, grid: SphereGrid, i: int) -> HarmonicSpectrum:
    p = project_spectrum(spec, grid, i)
    pv = synthesize(p, grid).values
    if not np.all(pv > 0.0):
        raise PositivityError("Pi_i f is not positive; Theta_i undefined")
    return _cosine_spectrum(reanalyze(pv ** (-(grid.n + 1)), grid))


def theta(f, i: int) -> SupportField:
    """Theta_i(h) = C((Pi_i h)^{-(n+1)}), the support function of Gamma Pi_i^* K."""
    field_ = _as_field(f)
    spec = _spectrum_of(f)
    project_i(f, i)  # certifies the intermediate body
    return certify_spectrum(theta_spectrum(spec, field_.grid, i), field_.grid)


def degree01_projection(f) -> ScalarField:
    """pi_0 f + pi_1 f, the orthogonal projection onto degrees 0 and 1."""
    field_ = _as_field(f)
    return synthesize(analyze(field_, L=1), field_.grid)


def steiner_quadrature(f) -> ScalarField:
    """pi_0 f + pi_1 f from moments: mean + (1/omega_n) u . int f(x) x dx."""
    field_ = _as_field(f)
    grid = field_.grid
    n = grid.n
    area = n * omega(n)
    moment = (grid.weights * field_.values) @ grid.nodes
    return ScalarField(grid, integrate(field_) / area + grid.nodes @ moment / omega(n))


# ---------------------------------------------------------------------------
# planar operators


def _require_symmetric(spec: HarmonicSpectrum):
    if not spec.is_even(SYMMETRY_TOL * max(1.0, spec.norm())):
        raise ValueError("body is not origin-symmetric (odd modes above tolerance)")


def curvature_image_2d(f) -> SupportField:
    """Lambda K on S^1: the body with h'' + h = h_K^{-3}."""
    field_ = _as_field(f)
    grid = field_.grid
    if grid.n != 2:
        raise ValueError("curvature image is implemented on S^1 only")
    spec = _spectrum_of(f)
    _require_symmetric(spec)
    if not np.all(field_.values > 0.0):
        raise PositivityError("support function must be positive")
    rhs = reanalyze(synthesize(spec, grid).values ** -3.0, grid)
    k = rhs.degrees
    div = np.where(k % 2 == 0, 1.0 - k * k, np.inf)
    sol = HarmonicSpectrum(2, rhs.L, rhs.coeffs / div)
    return certify_spectrum(sol, grid)


def radial_from_support_2d(h, newton_steps: int = 50) -> RadialField:
    """Radial function of a planar C^2_+ body from its support function.

    The boundary point with normal angle t is h(t) e(t) + h'(t) e'(t); its
    polar angle t + atan2(h', h) is inverted by Newton iteration at every node.
    """
    field_ = _as_field(h)
    grid = field_.grid
    spec = _spectrum_of(h)
    a, b = to_order_arrays(spec)
    k = np.arange(spec.L + 1)

    def series(t):
        kt = np.multiply.outer(t, k)
        c, s = np.cos(kt), np.sin(kt)
        return c @ a + s @ b, s @ (-k * a) + c @ (k * b), c @ (-k * k * a) + s @ (-k * k * b)

    target = grid.phi
    # alpha is increasing with alpha(t + 2 pi) = alpha(t) + 2 pi; invert it on a
    # fine sample to seed Newton, which otherwise overshoots on eccentric bodies
    fine = 2.0 * math.pi * np.arange(8 * grid.size + 1) / (8 * grid.size)
    f0, f1, _ = series(fine)
    alpha = np.unwrap(fine + np.arctan2(f1, f0))
    shift = alpha[0]
    t = np.interp(np.mod(target - shift, 2.0 * math.pi) + shift, alpha, fine)
    for _ in range(newton_steps):
        f0, f1, f2 = series(t)
        alpha = t + np.arctan2(f1, f0)
        resid = np.angle(np.exp(1j * (alpha - target)))
        dalpha = f0 * (f0 + f2) / (f0 * f0 + f1 * f1)
        t = t - resid / dalpha
        if np.max(np.abs(resid)) < 1e-15:
            break
    f0, f1, _ = series(t)
    return RadialField(ScalarField(grid, np.sqrt(f0 * f0 + f1 * f1)))


# ---------------------------------------------------------------------------
# body specifications

_KINDS = ("ball", "offset_ball", "ellipsoid", "harmonic_perturbation", "random_smooth")


@dataclass(frozen=True)
class BodySpec:
    """Declarative description of a test body; ``params`` is JSON-compatible."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown body kind {self.kind!r}")
        if self.kind == "harmonic_perturbation":
            for t in self.params.get("terms", []):
                k, l = int(t[0]), int(t[1])
                if k < 0 or not 1 <= l <= 2 * k + 1:
                    raise ValueError(f"term {list(t)}: order must lie in 1..{2 * k + 1}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BodySpec":
        d = dict(d)
        return cls(d.pop("kind"), d)

    @classmethod
    def from_json(cls, text: str) -> "BodySpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def ball(cls, r: float = 1.0):
        return cls("ball", {"r": r})

    @classmethod
    def offset_ball(cls, r: float, center):
        return cls("offset_ball", {"r": r, "center": list(center)})

    @classmethod
    def ellipsoid(cls, semi_axes, rotation: float = 0.0):
        params = {"semi_axes": list(semi_axes)}
        if rotation:
            params["rotation"] = rotation
        return cls("ellipsoid", params)

    @classmethod
    def harmonic_perturbation(cls, base_radius: float, terms):
        return cls("harmonic_perturbation",
                   {"base_radius": base_radius, "terms": [list(t) for t in terms]})

    @classmethod
    def random_smooth(cls, seed: int, L: int, amplitude: float, symmetric: bool = False):
        return cls("random_smooth",
                   {"seed": seed, "L": L, "amplitude": amplitude, "symmetric": symmetric})


def random_perturbation(n: int, grid: SphereGrid, seed: int, L: int, amplitude: float,
                        symmetric: bool = False) -> HarmonicSpectrum:
    """Random degree 2..L perturbation scaled to the given C^2 proxy."""
    if amplitude > MAX_PERTURBATION:
        raise ValueError(f"amplitude {amplitude} exceeds the {MAX_PERTURBATION} guardrail")
    rng = np.random.default_rng(seed)
    degrees = [k for k in range(2, L + 1) if not (symmetric and k % 2)]
    p = HarmonicSpectrum.random(n, L, rng, degrees=degrees, decay=2.0)
    scale = c2_proxy(p.truncate(grid.max_degree), grid)
    return p * (amplitude / scale) if scale > 0 else p


def body_field(body: BodySpec, grid: SphereGrid) -> ScalarField:
    """Sample the support function described by ``body``."""
    n = grid.n
    p = body.params
    u = grid.nodes
    if body.kind == "ball":
        return ScalarField.constant(grid, float(p.get("r", 1.0)))
    if body.kind == "offset_ball":
        c = np.asarray(p["center"], dtype=float)
        if c.shape != (n,):
            raise ValueError(f"center must have {n} components")
        return ScalarField(grid, float(p["r"]) + u @ c)
    if body.kind == "ellipsoid":
        ax = np.asarray(p["semi_axes"], dtype=float)
        if ax.shape != (n,) or np.any(ax <= 0):
            raise ValueError(f"semi_axes must be {n} positive numbers")
        v = u
        rot = float(p.get("rotation", 0.0))
        if rot:
            if n != 2:
                raise ValueError("rotation is supported for planar ellipses only")
            c, s = math.cos(rot), math.sin(rot)
            v = u @ np.array([[c, -s], [s, c]])
        return ScalarField(grid, np.sqrt((v * v) @ (ax * ax)))
    if body.kind == "harmonic_perturbation":
        L = max([int(t[0]) for t in p["terms"]] + [0])
        spec = HarmonicSpectrum.zeros(n, L)
        c = spec.coeffs.copy()
        for k, l, amp in p["terms"]:
            try:
                c[spec.index(int(k), int(l))] += float(amp)
            except IndexError as exc:
                raise ValueError(f"term {[k, l, amp]}: {exc}") from None
        pert = synthesize(HarmonicSpectrum(n, L, c), grid)
        return pert + float(p["base_radius"])
    pert = random_perturbation(n, grid, int(p["seed"]), int(p["L"]), float(p["amplitude"]),
                               bool(p.get("symmetric", False)))
    return synthesize(pert.truncate(grid.max_degree), grid) + float(p.get("base_radius", 1.0))


def body_support(body: BodySpec, grid: SphereGrid) -> SupportField:
    try:
        return certify(body_field(body, grid))
    except BandLimitError as exc:
        raise ConvexityError(f"{body.kind} is not resolved on this grid: {exc}") from exc
