"""Recovering manifold geometry from random geometric graphs."""

__version__ = "0.1.0"
