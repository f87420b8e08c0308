"""Equilibrium sandpiles on metric networks."""
__version__ = "0.1.0"
