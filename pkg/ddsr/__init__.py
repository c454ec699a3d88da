"""Exact super-resolution estimation of doubly-dispersive channels."""

__version__ = "0.1.0"
