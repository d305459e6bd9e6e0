"""Experiment configuration defaults and loading."""
