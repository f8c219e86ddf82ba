"""Signature features for longitudinal mood scores with missing responses."""

__version__ = "0.1.0"
