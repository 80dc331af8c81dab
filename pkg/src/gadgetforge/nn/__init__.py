"""Numpy neural networks with explicit backward passes."""
