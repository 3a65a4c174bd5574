"""Reliability-aware attribute annotation transfer and soft-biometric recognition."""

__version__ = "0.1.0"
