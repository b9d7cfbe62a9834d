"""Noisy-target training (NyTT) for single-channel speech enhancement."""

__version__ = "0.1.0"
