"""Multiscale information storage of linear long-range correlated processes."""

__version__ = "0.1.0"
