"""Guessing probabilities for noisy quantum measurements under classical and quantum side information."""

__version__ = "0.1.0"
