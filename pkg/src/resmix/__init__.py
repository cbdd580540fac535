"""Weighted resolvent and proximal averages over finite or discretized measure spaces."""

__version__ = "0.1.0"
