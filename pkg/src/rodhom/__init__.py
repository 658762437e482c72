"""Effective bending-torsion rod models for prestrained composite rods."""

__version__ = "0.1.0"
