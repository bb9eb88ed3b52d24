"""Desk-scale simulation and verification of root separation for random Kac polynomials."""

__version__ = "0.1.0"
