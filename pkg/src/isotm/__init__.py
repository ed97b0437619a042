"""Isotropic almost complex structures on tangent bundles and harmonic unit vector fields."""

__version__ = "0.1.0"
