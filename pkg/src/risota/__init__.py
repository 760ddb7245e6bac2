"""Simulator for RIS-assisted over-the-air federated learning with noisy up- and downlinks."""

__version__ = "0.1.0"
