"""Numerical verification toolkit for moment asymptotics of the hyperbolic
Anderson model with time-fractional Gaussian noise."""

__version__ = "0.1.0"
