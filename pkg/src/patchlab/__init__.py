"""Numerical toolkit for vortex patch regularity in bounded domains."""

__version__ = "0.1.0"
