"""Quantum reservoir computing for forecasting and characterizing chaotic maps."""

__version__ = "1.0.0"
