"""Metrics, statistics, and run aggregation."""
