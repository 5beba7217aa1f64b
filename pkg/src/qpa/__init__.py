"""Exact timing-distribution and side-channel analysis for loop-free bitvector programs."""

__version__ = "0.1.0"
