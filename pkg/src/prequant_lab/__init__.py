"""Numerical laboratory for three moment-map PDE systems on flat complex tori.

Subpackages cover exact-rational Chern-Weil calculus, spectral field
calculus on T^1 and T^2, a generalised Monge-Ampere Newton solver, the
line-bundle moment-map lab, the rank-2 Higgs lab, and the
Calabi-Yang-Mills continuation solver.
"""

__version__ = "0.1.0"
