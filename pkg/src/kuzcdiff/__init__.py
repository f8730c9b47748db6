"""Truncated inner c-differential analysis of Kuznyechik."""

__version__ = "0.1.0"
