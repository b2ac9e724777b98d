"""Narrow-band interference analysis and FBMC-SS link simulation for UWB links."""

__version__ = "0.1.0"
