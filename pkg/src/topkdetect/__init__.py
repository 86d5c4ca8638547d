"""Budgeted detection of the highest in-degree entities in large networks."""

__version__ = "0.1.0"
