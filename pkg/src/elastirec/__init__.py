"""Reconstruction of initial displacement and velocity in linear elastodynamics
from boundary Cauchy data, via a Legendre-exponential time reduction and a
regularized least-squares solve."""

__version__ = "0.1.0"
