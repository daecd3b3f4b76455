"""Autoencoder-ensemble minority augmentation with a 1-D CNN survival classifier."""

__version__ = "0.1.0"
