"""Orientation-preserving curved meshes for radial cavitation problems."""

__version__ = "0.1.0"
