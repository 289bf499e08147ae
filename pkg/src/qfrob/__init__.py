"""Numerics for Q-regular vector fields, their flows and Frobenius charts."""

__version__ = "0.1.0"
