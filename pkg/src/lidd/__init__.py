"""Interconnection and divergence discovery for multi-sensor systems."""

__version__ = "0.1.0"
