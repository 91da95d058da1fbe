"""Clean/noisy sample selection for noisy-labeled, intrinsically long-tailed data."""

__version__ = "0.1.0"
