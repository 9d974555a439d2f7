"""Numerical library for the clamped biharmonic mean field equation on the unit 4-ball."""

__version__ = "0.1.0"
