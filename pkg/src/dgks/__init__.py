"""Adaptive local basis discontinuous Galerkin solver for periodic
Kohn-Sham-type model systems, with a planewave reference solver."""

__version__ = "0.1.0"
