# src/rombif_mcp/__init__.py
"""Rombif - reduced-basis detection of symmetry-breaking bifurcations in channel flow."""

__version__ = "0.1.0"
