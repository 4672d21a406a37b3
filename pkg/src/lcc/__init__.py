"""Learned cooperative coevolution around CMA-ES subgroup solvers."""

__version__ = "0.1.0"
