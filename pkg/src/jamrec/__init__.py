"""Jamming-policy recognition over multi-channel networks with a numpy GRU."""

__version__ = "0.1.0"
