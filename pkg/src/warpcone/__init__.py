"""Finite-net models of warped cones and the coarse-geometric invariants around them."""

__version__ = "0.1.0"
