"""Simulation and verification toolkit for group-invariant interacting particle systems."""

__version__ = "0.1.0"
