"""Finite-rank ansatz pipeline for lattice phi^4 ground states."""

__version__ = "0.1.0"
