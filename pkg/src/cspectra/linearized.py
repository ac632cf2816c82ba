"""Fixed-point defect maps X and Y, their linearizations at the ball, and solvers.

At the unit ball every operator in the chain is rotation-equivariant, so
derivatives act degree by degree. The multiplier tables below are closed
forms; ``finite_difference_derivative`` checks them against the nonlinear
maps on the grid.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bodycalc import (
    Q_i_values, certify, certify_spectrum, project_spectrum, q_i_values, theta_spectrum,
    volume_i,
)
from .errors import LowDegreeContentError, SingularMultiplierError
from .grid import ScalarField, integrate
from .harmonics import (
    HarmonicSpectrum, analyze, cosine_eigenvalue, dim_harmonic, omega, radon_eigenvalue,
    require_band_limited, synthesize,
)

RESIDUAL_TOL = 1e-12
LOW_DEGREE_TOL = 1e-12
KERNEL_TOL = 1e-8


# ---------------------------------------------------------------------------
# scalar recursions on balls


def _check_ni(n: int, i: int):
    if n < 2 or not 1 <= i <= n - 1:
        raise ValueError(f"need n >= 2 and 1 <= i <= n-1, got n={n}, i={i}")


def pi_ball_power(n: int, i: int, k: int, c: float = 1.0) -> float:
    """Pi_i^k applied to the ball of radius c, via Pi_i(c) = c^i omega_{n-1}."""
    _check_ni(n, i)
    for _ in range(k):
        c = c ** i * omega(n - 1)
    return c


def theta_ball_value(n: int, i: int) -> float:
    """Theta_i(1) = 2 / omega_{n-1}^n."""
    _check_ni(n, i)
    return 2.0 / omega(n - 1) ** n


def theta_ball_power(n: int, i: int, m: int, c: float = 1.0) -> float:
    """Theta_i^m of the ball of radius c, via Theta_i(c) = Theta_i(1) c^{-i(n+1)}."""
    t1 = theta_ball_value(n, i)
    for _ in range(m):
        c = t1 * c ** (-i * (n + 1))
    return c


def theta_fixed_radius(n: int, i: int) -> float:
    """The radius r with Theta_i(r) = r."""
    return theta_ball_value(n, i) ** (1.0 / (1 + i * (n + 1)))


def theta_stage_factor(n: int, i: int, k: int) -> float:
    """Relative multiplier of one Theta_i stage on degree k at a ball."""
    return -(n + 1) * i * radon_eigenvalue(n, k) * cosine_eigenvalue(n, k) / (2.0 * omega(n - 1))


# ---------------------------------------------------------------------------
# multipliers


def dx_factor(n: int, i: int, m: int, k: int) -> float:
    if k < 2:
        return 0.0
    return 1.0 - (i * radon_eigenvalue(n, k)) ** (2 * m)


def dx_multiplier(n: int, i: int, m: int, k: int) -> float:
    """Degree-k multiplier of the derivative of X^{2m}_{i,1} at 0."""
    if n < 3 or not 1 <= i <= n - 1 or m < 1:
        raise ValueError(f"invalid (n, i, m) = ({n}, {i}, {m})")
    if k < 2:
        return 0.0
    return pi_ball_power(n, i, 2 * m) * dx_factor(n, i, m, k)


def dy_factor(n: int, i: int, k: int, m: int = 2) -> float:
    if k < 2:
        return 0.0
    return 1.0 - theta_stage_factor(n, i, k) ** m


def dy_multiplier(n: int, i: int, k: int, m: int = 2) -> float:
    """Degree-k multiplier of the derivative of Y^m_{i,1} at 0 (m=2 by default)."""
    if n < 3 or not 1 <= i <= n - 1 or m < 1:
        raise ValueError(f"invalid (n, i, m) = ({n}, {i}, {m})")
    if k < 2:
        return 0.0
    return theta_ball_power(n, i, m) * dy_factor(n, i, k, m)


@dataclass
class MultiplierTable:
    n: int
    i: int
    m: int
    L: int
    kind: str
    scale: float
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.entries.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite multiplier at k={k}")
        if any(self.entries.get(k, 0.0) != 0.0 for k in (0, 1)):
            raise ValueError("degrees 0 and 1 must have multiplier exactly 0")

    def factor(self, k: int) -> float:
        return self.entries[k] / self.scale

    def __call__(self, n: int, k: int) -> float:
        return self.entries[k]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "multiplier"])
            for k in sorted(self.entries):
                w.writerow([k, repr(self.entries[k])])


def dx_table(n: int, i: int, m: int, L: int = 20) -> MultiplierTable:
    return MultiplierTable(n, i, m, L, "dx", pi_ball_power(n, i, 2 * m),
                           {k: dx_multiplier(n, i, m, k) for k in range(L + 1)})


def dy_table(n: int, i: int, L: int = 20, m: int = 2) -> MultiplierTable:
    return MultiplierTable(n, i, m, L, "dy", theta_ball_power(n, i, m),
                           {k: dy_multiplier(n, i, k, m) for k in range(L + 1)})


def kernel_dimension(table: MultiplierTable, L: int = 20, tol: float = KERNEL_TOL) -> int:
    """Sum of dim H_k over k <= L whose multiplier is below tol * scale."""
    if L < 6:
        raise ValueError("kernel counting needs L >= 6")
    if L > table.L:
        raise ValueError(f"table only covers k <= {table.L}")
    return sum(dim_harmonic(table.n, k) for k in range(L + 1)
               if abs(table.entries[k]) < tol * abs(table.scale))


def nondegeneracy_margin(n: int, i: int, k_max: int = 100) -> float:
    """max over even 2 <= k <= k_max of |i v_{k,n}|; bounded by (n-2)/(n-1) when i < n-1."""
    return max(abs(i * radon_eigenvalue(n, k)) for k in range(2, k_max + 1, 2))


# ---------------------------------------------------------------------------
# resolvent solvers


def _low_degree_guard(h: HarmonicSpectrum, forbidden):
    tol = LOW_DEGREE_TOL * max(1.0, h.norm())
    for k in forbidden:
        if k <= h.L and np.max(np.abs(h.degree(k)), initial=0.0) > tol:
            raise LowDegreeContentError(f"right-hand side has degree-{k} content")


def _divide(h: HarmonicSpectrum, factor, start: int) -> HarmonicSpectrum:
    k = h.degrees
    div = np.ones(len(k))
    for deg in range(start, h.L + 1):
        f = factor(deg)
        if abs(f) < 1e-12:
            raise SingularMultiplierError(f"multiplier vanishes at degree {deg}")
        div[k == deg] = f
    c = np.where(k >= start, h.coeffs / div, 0.0)
    return HarmonicSpectrum(h.n, h.L, c)


def _check_residual(g, h, factor, start):
    r = resolvent_residual(g, h, factor, start)
    if r > RESIDUAL_TOL * max(1.0, h.norm()):
        raise ArithmeticError(f"resolvent residual {r:.2e} above tolerance")


def resolvent_residual(g: HarmonicSpectrum, h: HarmonicSpectrum, factor, start: int) -> float:
    applied = g.apply_multiplier(lambda n, k: factor(k) if k >= start else 0.0)
    return (applied - h).norm()


def solve_resolvent_x(h: HarmonicSpectrum, n: int, i: int, m: int) -> HarmonicSpectrum:
    """Solve g - i^{2m} R^{2m} g = h for h without degree 0/1 content."""
    if h.n != n:
        raise ValueError("spectrum dimension does not match n")
    _check_ni(n, i)
    _low_degree_guard(h, (0, 1))
    factor = lambda k: dx_factor(n, i, m, k)  # noqa: E731
    g = _divide(h, factor, 2)
    _check_residual(g, h, factor, 2)
    return g


def solve_resolvent_y(h: HarmonicSpectrum, n: int, i: int) -> HarmonicSpectrum:
    """Solve g - (i^2 (n+1)^2 / 4 omega_{n-1}^2) C^2 R^2 g = h.

    Degrees 0, 1 must vanish, and degree 2 as well when i = n-1 (there the
    equation has a degree-2 kernel).
    """
    if h.n != n:
        raise ValueError("spectrum dimension does not match n")
    _check_ni(n, i)
    start = 3 if i == n - 1 else 2
    _low_degree_guard(h, range(start))
    factor = lambda k: dy_factor(n, i, k)  # noqa: E731
    g = _divide(h, factor, start)
    _check_residual(g, h, factor, start)
    return g


# ---------------------------------------------------------------------------
# nonlinear maps


def _pi1_part(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    return spec.with_degrees([1])


def _defect(F: HarmonicSpectrum, h: HarmonicSpectrum, s: float) -> HarmonicSpectrum:
    sh = h * s
    return (sh - F) - _pi1_part(sh)


def _prepare_body(g: ScalarField):
    h_field = g + 1.0
    body = certify(h_field)
    return body.spectrum, body.grid


def x_map(g: ScalarField, i: int, m: int = 1) -> ScalarField:
    """X^{2m}_{i,1}(g): the defect of Pi_i^{2m} at the body 1 + g.

    Equals -Pi_i^{2m} h + s h - pi_1(s h) with h = 1 + g and
    s = (V_{i+1}(Pi_i^{2m} h) / V_{i+1}(h))^{1/(1+i)}.
    """
    if g.grid.n != 3:
        raise ValueError("x_map is defined on S^2")
    if not 1 <= m <= 4:
        raise ValueError("m must lie in 1..4")
    h, grid = _prepare_body(g)
    F = h
    for _ in range(2 * m):
        F = certify_spectrum(project_spectrum(F, grid, i), grid).spectrum
    hf = synthesize(h, grid)
    Ff = synthesize(F, grid)
    s = (volume_i(Ff, i + 1) / volume_i(hf, i + 1)) ** (1.0 / (1 + i))
    return synthesize(_defect(F, h, s), grid)


def y_map(g: ScalarField, i: int, m: int = 2) -> ScalarField:
    """Y^m_{i,1}(g): the defect of Theta_i^m at 1 + g, normalized by volume."""
    if g.grid.n != 3:
        raise ValueError("y_map is defined on S^2")
    if m < 1:
        raise ValueError("m must be positive")
    h, grid = _prepare_body(g)
    n = grid.n
    F = h
    for _ in range(m):
        certify_spectrum(project_spectrum(F, grid, i), grid)
        F = certify_spectrum(theta_spectrum(F, grid, i), grid).spectrum
    hf = synthesize(h, grid)
    Ff = synthesize(F, grid)
    s = (volume_i(Ff, n) / volume_i(hf, n)) ** (1.0 / n)
    return synthesize(_defect(F, h, s), grid)


# ---------------------------------------------------------------------------
# finite-difference engine


@dataclass
class DerivativeReport:
    map_id: str
    params: dict
    base: str
    direction: str
    steps: list
    analytic: list | None
    finite_difference: list
    rel_errors: list | None
    scheme: str = "central"

    def quadratic_scaling(self, floor: float = 1e-8) -> bool:
        """True if the two finest steps show O(t^2) decay or sit at the roundoff floor."""
        if not self.rel_errors or len(self.rel_errors) < 2:
            return False
        order = np.argsort(self.steps)[::-1]
        e1, e2 = self.rel_errors[order[-2]], self.rel_errors[order[-1]]
        t1, t2 = self.steps[order[-2]], self.steps[order[-1]]
        if max(e1, e2) <= floor:
            return True
        return e2 <= e1 * (t2 / t1) ** 2 * 4.0

    def to_dict(self) -> dict:
        return {
            "map_id": self.map_id, "params": self.params, "base": self.base,
            "direction": self.direction, "scheme": self.scheme, "steps": self.steps,
            "rel_errors": self.rel_errors, "quadratic_scaling": self.quadratic_scaling(),
            "analytic": self.analytic, "finite_difference": self.finite_difference,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _constant_value(f: ScalarField, tol: float = 1e-12):
    c = float(np.mean(f.values))
    return c if np.max(np.abs(f.values - c)) <= tol * max(1.0, abs(c)) else None


def _spectral_apply(direction: ScalarField, mult) -> np.ndarray:
    spec = require_band_limited(direction)
    return synthesize(spec.apply_multiplier(mult), direction.grid).values


def _map_Q(base, direction, i=1, **_):
    grid = base.grid

    def P(f):
        return Q_i_values(require_band_limited(f), grid, i)

    def D():
        return i * q_i_values(require_band_limited(base), require_band_limited(direction), grid, i)

    return P, D, 1.0


def _map_Pi(base, direction, i=1, k=1, **_):
    grid = base.grid

    def P(f):
        spec = certify(f).spectrum
        for _ in range(k):
            spec = certify_spectrum(project_spectrum(spec, grid, i), grid).spectrum
        return synthesize(spec, grid).values

    c = _constant_value(base)
    if c is None:
        return P, None, 1.0
    n = grid.n
    ck = pi_ball_power(n, i, k, c)
    return P, lambda: _spectral_apply(
        direction, lambda n_, deg: ck / c * (i * radon_eigenvalue(n, deg)) ** k), ck / c


def _map_X(base, direction, i=1, m=1, **_):
    def P(f):
        return x_map(f, i, m).values

    scale = pi_ball_power(base.grid.n, i, 2 * m)
    if _constant_value(base) != 0.0:
        return P, None, scale
    return P, lambda: _spectral_apply(direction, lambda n, k: dx_multiplier(n, i, m, k)), scale


def _map_Y(base, direction, i=1, m=2, **_):
    def P(f):
        return y_map(f, i, m).values

    scale = theta_ball_power(base.grid.n, i, m)
    if _constant_value(base) != 0.0:
        return P, None, scale
    return P, lambda: _spectral_apply(direction, lambda n, k: dy_multiplier(n, i, k, m)), scale


def _map_V_Pi(base, direction, i=1, k=1, **_):
    grid = base.grid
    n = grid.n

    def P(f):
        spec = certify(f).spectrum
        for _ in range(k):
            spec = certify_spectrum(project_spectrum(spec, grid, i), grid).spectrum
        return np.array([volume_i(synthesize(spec, grid), i + 1)])

    if _constant_value(base) != 1.0:
        return P, None, 1.0
    return P, lambda: np.array([volume_derivative_closed_form(n, i, k, integrate(direction))]), 1.0


MAPS = {"Q": _map_Q, "Pi": _map_Pi, "X": _map_X, "Y": _map_Y, "V_Pi": _map_V_Pi}


def volume_derivative_closed_form(n: int, i: int, k: int, integral_g: float) -> float:
    """d/dt V_{i+1}(Pi_i^k(1 + t g)) at t = 0.

    Only degree 0 survives the integral; it is scaled by i at every stage, and
    V_{i+1} has derivative (i+1)/n c^i times the integral at the ball c.
    """
    ck = pi_ball_power(n, i, k)
    return (i + 1) / n * ck ** i * ck * i ** k * integral_g


def finite_difference_derivative(map_id: str, base: ScalarField, direction: ScalarField,
                                 steps=(1e-3, 1e-4), base_label: str = "",
                                 direction_label: str = "", **params) -> DerivativeReport:
    """Central differences (P(f+tg) - P(f-tg)) / 2t, compared to any registered analytic value.

    Relative errors use sup norms. The denominator is the larger of |analytic|
    and scale*|g|, where scale is the ball-value factor that bounds the
    multiplier table of the map (1 where no such factor exists). This keeps
    kernel directions, whose analytic derivative is zero, well defined.
    """
    if map_id not in MAPS:
        raise ValueError(f"unknown map {map_id!r}; choose from {sorted(MAPS)}")
    P, D, scale = MAPS[map_id](base, direction, **params)
    fds = []
    for t in steps:
        plus = P(base + direction * t)
        minus = P(base - direction * t)
        fds.append((plus - minus) / (2.0 * t))
    analytic = None if D is None else D()
    errors = None
    if analytic is not None:
        denom = max(float(np.max(np.abs(analytic))), scale * direction.sup(), 1e-300)
        errors = [float(np.max(np.abs(fd - analytic))) / denom for fd in fds]
    return DerivativeReport(
        map_id, dict(params), base_label, direction_label, [float(t) for t in steps],
        None if analytic is None else analytic.tolist(),
        [fd.tolist() for fd in fds], errors)


def fit_coefficient(f: ScalarField, k: int, l: int) -> float:
    """Coefficient of Y_{k,l} in f (orthonormal basis)."""
    return analyze(f)[k, l]
