"""Krylov spread complexity laboratory."""

__version__ = "0.1.0"
