"""Photon / dark-count identification pipeline for SNSPD waveforms."""

__version__ = "0.1.0"
