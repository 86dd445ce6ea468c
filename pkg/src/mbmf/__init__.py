"""Normalized multifractal detrended fluctuation analysis of inter-event times."""
__version__ = "0.1.0"
