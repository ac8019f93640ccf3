"""Numerical laboratory for joint eigenfunctions of 2D integrable systems."""

__version__ = "0.1.0"
