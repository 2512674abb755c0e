"""Slip-triggered grasp control for a cable-driven prosthetic hand."""

__version__ = "0.1.0"
