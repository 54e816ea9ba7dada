"""Numerical laboratory for the hyperbolic Schrodinger equation i u_t + u_xy = |u|^p u."""

__version__ = "0.1.0"
