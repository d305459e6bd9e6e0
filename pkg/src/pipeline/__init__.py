"""Experiment stages and their on-disk layout."""
