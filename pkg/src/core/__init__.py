"""Alphabets, contexts, tree shapes, group norms and set-family metrics."""
