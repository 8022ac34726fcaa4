"""Viable-set renormalization solver for low-energy subspaces of 1D chains."""

__version__ = "0.1.0"
