"""Stochastic convolutions for the heat/wave interpolating Volterra equation."""

__version__ = "0.1.0"
