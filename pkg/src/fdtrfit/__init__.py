"""Hybrid global/local optimization for thermoreflectance parameter fitting."""

__version__ = "0.1.0"
