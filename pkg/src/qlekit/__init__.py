"""Simulation and verification toolkit for quantum Loewner evolution."""

__version__ = "0.1.0"
