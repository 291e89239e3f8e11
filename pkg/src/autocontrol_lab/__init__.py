"""Spectral mode-space laboratory for time-dilatation damping schemes."""

__version__ = "0.1.0"
