"""Estimation of connectivity parameters and graphon functionals in block models."""

__version__ = "0.1.0"
