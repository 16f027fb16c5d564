"""Monte-Carlo simulator for intrinsic-correlation quantum key generation."""

__version__ = "0.1.0"
