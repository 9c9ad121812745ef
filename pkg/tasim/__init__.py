"""Transmit antenna selection with shadowing side information over Generalized-K fading."""

__version__ = "0.1.0"
