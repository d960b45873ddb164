"""Distributed MIMO ISAC simulation: scenarios, channels, positioning bounds
and estimators, and uplink spectral efficiency."""

__version__ = "0.1.0"
