"""Exact non-Markovian dynamics of a single-mode cavity coupled to a bosonic reservoir."""

__version__ = "0.1.0"
