"""Slow and fast decay of solutions to u' + Au = f(u) in spectral coordinates."""

__version__ = "0.1.0"
