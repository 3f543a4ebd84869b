"""Numerical verification of the kernels, solvers and searches."""
