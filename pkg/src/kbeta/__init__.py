"""Numerical laboratory for quantized K-energy functionals on the reduced Riemann sphere."""

__version__ = "0.1.0"
