"""Randomised Cantor measures of Salem type and finite-depth certificates for them."""

__version__ = "0.1.0"
