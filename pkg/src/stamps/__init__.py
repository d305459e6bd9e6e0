"""Stamp data model and normalization."""
