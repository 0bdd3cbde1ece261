"""Numerical laboratory for blow-up and lifespan bounds of semilinear wave
equations with scattering space-dependent damping."""

__version__ = "0.1.0"

from .exponents import critical_exponents, gamma, theory_lifespan  # noqa: F401
