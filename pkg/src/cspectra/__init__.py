"""Spectral numerics for convex-body operators on S^1 and S^2."""
