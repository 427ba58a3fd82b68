"""Marginal dynamic effects for discrete choice."""
