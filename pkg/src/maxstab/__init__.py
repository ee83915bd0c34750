"""Simulation of max-stable random fields on finite grids."""

__version__ = "0.1.0"
