"""Topology-authenticated elliptic-curve key establishment toolkit."""

__version__ = "0.1.0"
