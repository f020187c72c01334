"""Numerical toolkit for Manin pairs, group-valued moment maps and moduli of flat bundles."""

__version__ = "0.1.0"
