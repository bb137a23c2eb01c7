"""Symbolic-numeric toolkit for higher-order symmetry operators of 2D
separable Schroedinger operators."""

__version__ = "0.1.0"
