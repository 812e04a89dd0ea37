"""Finite-element laboratory for eigenvalue inequalities on planar domains."""

__version__ = "0.1.0"
