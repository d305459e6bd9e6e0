"""Synthetic astronomical stamp benchmark."""
