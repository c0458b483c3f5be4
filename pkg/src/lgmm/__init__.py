"""lgmm - Mass-preserving Lagrange–Galerkin schemes on moving meshes."""

__version__ = "0.1.0"
