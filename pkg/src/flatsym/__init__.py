"""Flat symplectic connections from Finsler surfaces: frames, flows, transport and deformation classes."""

__version__ = "0.1.0"
