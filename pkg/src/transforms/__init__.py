"""Transformation catalog, primitive operations, and filter kernels."""
