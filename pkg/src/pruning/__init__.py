"""Tree pruning, completion and prediction."""
