"""Visible-suffix trie with per-group occurrence counts."""
