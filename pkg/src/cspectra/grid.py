"""Quadrature grids on S^2 and S^1 and sampled fields living on them.

S^2 uses Gauss-Legendre nodes in cos(colatitude) times a uniform longitude
ring with twice as many points; S^1 uses uniform angles. Node order on S^2 is
colatitude-major, so ``values.reshape(T, 2T)`` recovers the tensor layout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError

DEFAULT_RESOLUTION = 48


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    theta_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def max_degree(self) -> int:
        """Largest degree analyzed exactly for inputs of the same degree."""
        return self.resolution - 1

    @property
    def measure(self) -> float:
        return 4.0 * math.pi if self.n == 3 else 2.0 * math.pi

    @property
    def n_phi(self) -> int:
        return 2 * self.resolution

    def __repr__(self) -> str:
        return f"SphereGrid(n={self.n}, resolution={self.resolution}, size={self.size})"


@lru_cache(maxsize=16)
def build_grid(n: int, resolution: int = DEFAULT_RESOLUTION) -> SphereGrid:
    """Build the quadrature grid for S^{n-1}, n in {2, 3}.

    For n=3, ``resolution`` T gives T Gauss-Legendre colatitudes times 2T
    longitudes; for n=2 it gives 2T uniform angles. Both integrate
    polynomials / trigonometric polynomials of degree <= 2T-1 exactly.
    """
    if n not in (2, 3):
        raise ValueError(f"grids exist only for n in (2, 3), got n={n}")
    if resolution < 4:
        raise ValueError(f"resolution must be >= 4, got {resolution}")
    T = int(resolution)
    n_phi = 2 * T
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    dphi = 2.0 * math.pi / n_phi
    if n == 2:
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        weights = np.full(n_phi, dphi)
        grid = SphereGrid(2, T, nodes, weights, 2 * T - 1, theta=np.zeros(0), phi=phi)
    else:
        x, wx = np.polynomial.legendre.leggauss(T)
        # descending cos(theta) -> ascending colatitude
        x, wx = x[::-1].copy(), wx[::-1].copy()
        theta = np.arccos(x)
        st = np.sqrt(1.0 - x * x)
        nodes = np.empty((T, n_phi, 3))
        nodes[..., 0] = st[:, None] * np.cos(phi)[None, :]
        nodes[..., 1] = st[:, None] * np.sin(phi)[None, :]
        nodes[..., 2] = x[:, None]
        nodes = nodes.reshape(-1, 3)
        weights = (wx[:, None] * np.full(n_phi, dphi)[None, :]).ravel()
        grid = SphereGrid(3, T, nodes, weights, 2 * T - 1, theta=theta, phi=phi,
                          theta_weights=wx)
    for arr in (grid.nodes, grid.weights, grid.theta, grid.phi):
        arr.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Function values sampled at every node of a grid."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise GridMismatchError(
                f"expected {self.grid.size} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: SphereGrid, func) -> "ScalarField":
        """Sample ``func(nodes) -> values`` on ``grid``."""
        return cls(grid, np.asarray(func(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, grid: SphereGrid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.size, float(c)))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid is not self.grid:
                raise GridMismatchError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __rtruediv__(self, other):
        return ScalarField(self.grid, self._other(other) / self.values)

    def __pow__(self, p):
        return ScalarField(self.grid, self.values ** p)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def integrate(f: ScalarField, method: str = "pairwise") -> float:
    """Quadrature sum of weight * value.

    ``pairwise`` is numpy's pairwise summation (deterministic order);
    ``fsum`` is exactly rounded and independent of ordering altogether.
    """
    terms = f.grid.weights * f.values
    if method == "pairwise":
        return float(np.sum(terms))
    if method == "fsum":
        return math.fsum(terms.tolist())
    raise ValueError(f"unknown summation method {method!r}")


def inner(f: ScalarField, g: ScalarField) -> float:
    return integrate(f * g)


def write_field_csv(f: ScalarField, path) -> None:
    """Rows (node_index, x, y, z, weight, value); z is 0 on S^1."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_index", "x", "y", "z", "weight", "value"])
        for idx, (node, wt, v) in enumerate(zip(f.grid.nodes, f.grid.weights, f.values)):
            z = node[2] if len(node) == 3 else 0.0
            w.writerow([idx, repr(float(node[0])), repr(float(node[1])), repr(float(z)),
                        repr(float(wt)), repr(float(v))])


def read_field_csv(path, grid: SphereGrid) -> ScalarField:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != grid.size:
        raise GridMismatchError(f"CSV has {len(rows)} rows, grid has {grid.size} nodes")
    values = np.empty(grid.size)
    for row in rows:
        values[int(row["node_index"])] = float(row["value"])
    return ScalarField(grid, values)
