"""Numerical laboratory for 2s-stable nonlocal Dirichlet problems"""

__version__ = "0.1.0"
