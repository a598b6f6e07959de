"""Codebook-based direction estimation and user tracking for IRS-assisted mmWave links."""

__version__ = "0.1.0"
