"""Accelerated proximal gradient solvers and a tomography benchmark suite."""

__version__ = "0.1.0"
