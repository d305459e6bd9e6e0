"""Transformation-based one-class anomaly detection for image stamps."""
