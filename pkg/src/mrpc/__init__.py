"""Clustering on SPD and Grassmann manifolds through kernelised random projections."""

__version__ = "0.1.0"
