"""Compiled kernels and their pure-Python fallbacks."""
