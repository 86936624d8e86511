"""Likelihood-ascent and local-maximum-likelihood detection for large real MIMO channels."""

__version__ = "0.1.0"
