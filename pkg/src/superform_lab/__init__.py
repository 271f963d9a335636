"""Symbolic-numeric checks for Grassmann/Berezin forms on flat bundles."""

__version__ = "0.1.0"
