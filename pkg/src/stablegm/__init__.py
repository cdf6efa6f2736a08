"""Simulation, structure learning and evaluation of alpha-stable graphical models."""

__version__ = "0.1.0"
