"""Weighted Hodge Laplacian spectra on discretized self-shrinkers."""
__version__ = "0.1.0"
