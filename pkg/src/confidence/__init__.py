"""Confidence radii for the regularization events."""
