import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cspectra.errors import GridMismatchError
from cspectra.grid import (
    ScalarField, build_grid, inner, integrate, read_field_csv, write_field_csv,
)


def monomial_moment(a, b, c):
    """int_{S^2} x^a y^b z^c, zero unless all exponents are even."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    ga, gb, gc = (math.gamma((e + 1) / 2) for e in (a, b, c))
    return 2.0 * ga * gb * gc / math.gamma((a + b + c + 3) / 2)


@pytest.mark.parametrize("n,T", [(2, 8), (3, 8), (3, 48)])
def test_nodes_are_unit(n, T):
    g = build_grid(n, T)
    assert np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1.0)) <= 1e-14


def test_sizes_and_measure():
    g = build_grid(3, 10)
    assert g.size == 10 * 20 and g.max_degree == 9 and g.exactness_degree == 19
    assert np.sum(g.weights) == pytest.approx(4 * math.pi, rel=1e-14)
    c = build_grid(2, 10)
    assert c.size == 20 and np.sum(c.weights) == pytest.approx(2 * math.pi, rel=1e-14)


def test_grid_cache_returns_same_object():
    assert build_grid(3, 12) is build_grid(3, 12)


def test_grid_arrays_read_only():
    g = build_grid(3, 6)
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 2.0


@pytest.mark.parametrize("bad", [(1, 8), (4, 8), (3, 2)])
def test_grid_rejects_bad_arguments(bad):
    with pytest.raises(ValueError):
        build_grid(*bad)


@given(a=st.integers(0, 6), b=st.integers(0, 6), c=st.integers(0, 6))
def test_monomials_integrated_exactly(a, b, c):
    g = build_grid(3, 10)  # exact up to degree 19
    x, y, z = g.nodes.T
    f = ScalarField(g, x ** a * y ** b * z ** c)
    assert integrate(f) == pytest.approx(monomial_moment(a, b, c), abs=1e-13)


def test_circle_trig_exactness():
    g = build_grid(2, 8)
    for k in range(1, 16):
        f = ScalarField(g, np.cos(k * g.phi))
        assert abs(integrate(f)) < 1e-13


def test_fsum_and_pairwise_agree(rng):
    g = build_grid(3, 16)
    f = ScalarField(g, rng.standard_normal(g.size))
    assert integrate(f, "fsum") == pytest.approx(integrate(f), rel=1e-12, abs=1e-12)
    with pytest.raises(ValueError):
        integrate(f, "kahan")


def test_field_validation():
    g = build_grid(3, 6)
    with pytest.raises(GridMismatchError):
        ScalarField(g, np.zeros(5))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.size, np.nan))
    h = build_grid(3, 8)
    with pytest.raises(GridMismatchError):
        ScalarField.constant(g, 1.0) + ScalarField.constant(h, 1.0)


def test_field_arithmetic():
    g = build_grid(2, 6)
    f = ScalarField.from_function(g, lambda p: p[:, 0])
    assert np.allclose((2.0 * f + 1.0 - f).values, f.values + 1.0)
    assert np.allclose((1.0 / (f + 3.0)).values, 1.0 / (f.values + 3.0))
    assert inner(f, f) == pytest.approx(math.pi)


@pytest.mark.parametrize("n", [2, 3])
def test_field_csv_roundtrip(tmp_path, n, rng):
    g = build_grid(n, 6)
    f = ScalarField(g, rng.standard_normal(g.size))
    p = tmp_path / "f.csv"
    write_field_csv(f, p)
    header = p.read_text().splitlines()[0]
    assert header == "node_index,x,y,z,weight,value"
    assert np.array_equal(read_field_csv(p, g).values, f.values)
    with pytest.raises(GridMismatchError):
        read_field_csv(p, build_grid(n, 8))
