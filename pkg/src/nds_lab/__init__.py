"""Numerical toolkit for sequences of expanding circle maps."""
__version__ = "0.1.0"
