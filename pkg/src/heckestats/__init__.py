"""Hecke eigenvalue families for level-1 cusp forms and the fluctuation
statistics of their Sato-Tate interval counts."""

__version__ = "0.1.0"
