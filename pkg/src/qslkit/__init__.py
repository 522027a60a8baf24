"""Numerical toolkit for quantum speed limits, efficient Hamiltonians and quantum batteries."""

__version__ = "0.1.0"
