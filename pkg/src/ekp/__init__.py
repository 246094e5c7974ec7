"""Desk-scale numerical laboratory for the Euler-Korteweg-Poisson system."""

__version__ = "0.1.0"
