"""Robust control barrier certificates for input-affine polynomial systems."""

__version__ = "0.1.0"
