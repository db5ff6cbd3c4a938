"""Numerical laboratory for detection-event statistics, Fisher-information
functionals, two-component wavefunction dynamics, and their classical limits."""

__version__ = "0.1.0"
