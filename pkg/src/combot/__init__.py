"""Evolutionary synthesis of spatial compliant-mechanism robot legs."""

__version__ = "0.1.0"
