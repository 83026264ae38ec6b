"""Numerical verification toolkit for Smith immersions and submersions."""

__version__ = "0.1.0"
