"""Dirichlet normality scoring and the threshold rule."""
