"""Bi-level vehicle routing with flexible time windows."""

__version__ = "0.1.0"
