"""Numerical laboratory for classical and semiclassical scattering on conic ends."""

__version__ = "0.1.0"
