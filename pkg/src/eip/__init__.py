"""Particle-based elastic tactile sensor simulation."""

__version__ = "0.1.0"
