"""Laughter detection and cross-attention fusion for funny-moment classification."""

__version__ = "0.1.0"
