"""
Order-h window embedding of a context tree.

A window s = (x_{-h}, ..., x_{-1}) is indexed in base |A| with the newest
symbol as the last digit, so appending symbol a maps index s to
(s |A| + a) mod |A|^h.
"""

from typing import Dict

import numpy as np
from numpy.typing import NDArray

from src.core.alphabet import Context
from src.core.tree_shape import TreeShape, terminal_node


def window_count(order: int, alphabet_size: int) -> int:
    return alphabet_size ** order


def all_windows(order: int, alphabet_size: int) -> NDArray[np.int64]:
    """Every window as a row, oldest symbol first; row i has index i."""
    count = window_count(order, alphabet_size)
    indices = np.arange(count, dtype=np.int64)
    powers = alphabet_size ** np.arange(order - 1, -1, -1, dtype=np.int64)
    return (indices[:, None] // powers[None, :]) % alphabet_size


def window_index(window, alphabet_size: int) -> int:
    index = 0
    for symbol in window:
        index = index * alphabet_size + int(symbol)
    return index


def shift_table(order: int, alphabet_size: int) -> NDArray[np.int64]:
    """next_state[s, a] = index of the window obtained by appending a to s."""
    count = window_count(order, alphabet_size)
    states = np.arange(count, dtype=np.int64)[:, None]
    symbols = np.arange(alphabet_size, dtype=np.int64)[None, :]
    return (states * alphabet_size + symbols) % count


def window_terminals(shape: TreeShape, order: int) -> Dict[int, Context]:
    """Terminal node of every window; ``order`` must be at least the tree height."""
    return {
        index: terminal_node(shape, window)
        for index, window in enumerate(all_windows(order, shape.alphabet_size).tolist())
    }
