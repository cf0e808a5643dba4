"""Concept-bottleneck lung cancer detection for chest X-rays."""

__version__ = "0.1.0"
