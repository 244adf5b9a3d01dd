"""Finite-scale workbench for amalgamation classes, universal homomorphisms and clones."""

__version__ = "0.1.0"
