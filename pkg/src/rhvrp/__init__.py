"""Robust heterogeneous vehicle routing."""
