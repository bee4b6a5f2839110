"""Discrete-event MANET simulator with cache-sharing route discovery."""

__version__ = "0.1.0"
