"""Truncated Euler-Maruyama for time-changed SDEs with super-linear coefficients."""

__version__ = "0.1.0"
