"""Simulation and verification toolkit for beta-coalescents and stable CSBPs."""

__version__ = "0.1.0"
