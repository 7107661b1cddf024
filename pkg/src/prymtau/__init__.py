"""Numerical laboratory for the Bergman tau function on spaces of
n-differentials over hyperelliptic curves, with canonical cyclic covers."""

__version__ = "0.1.0"
