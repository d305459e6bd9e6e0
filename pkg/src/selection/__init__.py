"""Discrimination matrix and transformation pruning."""
