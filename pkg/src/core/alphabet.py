"""
Alphabets and context strings.

Contexts are tuples of symbol indices stored oldest-first, newest symbol last,
so ``parent(w)`` drops the front element and a tree walk consumes a past from
its end.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

from src.config.exceptions import ErrorCode, data_error, estimation_error

Context = Tuple[int, ...]


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of symbol tokens."""

    symbols: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if len(symbols) < 2:
            raise data_error(
                "Alphabet needs at least two symbols",
                ErrorCode.ALPHABET_INVALID,
                symbols=list(symbols)
            )
        if len(set(symbols)) != len(symbols):
            raise data_error(
                "Alphabet symbols must be distinct",
                ErrorCode.ALPHABET_INVALID,
                symbols=list(symbols)
            )
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    @classmethod
    def binary(cls) -> "Alphabet":
        return cls(("0", "1"))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise data_error(
                f"Unknown symbol '{token}'",
                ErrorCode.CORPUS_UNKNOWN_TOKEN,
                token=token,
                alphabet=list(self.symbols)
            )

    def encode(self, tokens: Iterable[str]) -> Context:
        return tuple(self.index(str(t)) for t in tokens)

    def decode(self, indices: Sequence[int]) -> Tuple[str, ...]:
        return tuple(self.symbols[i] for i in indices)

    def format(self, w: Sequence[int]) -> str:
        """Render a context as text, oldest symbol first. The root renders as ``e``."""
        if len(w) == 0:
            return "e"
        sep = "" if all(len(s) == 1 for s in self.symbols) else " "
        return sep.join(self.decode(w))

    def parse_context(self, text: str) -> Context:
        """Inverse of :meth:`format`."""
        text = text.strip()
        if text in ("", "e"):
            return ()
        if " " in text:
            return self.encode(text.split())
        return self.encode(list(text))


def parent(w: Context) -> Context:
    """Drop the oldest symbol."""
    if len(w) == 0:
        raise estimation_error("The root has no parent", ErrorCode.ROOT_NOT_REMOVABLE)
    return w[1:]


def is_suffix(w: Context, other: Context) -> bool:
    """True when ``w`` is a suffix of ``other`` (w ⪯ other)."""
    if len(w) > len(other):
        return False
    return len(w) == 0 or tuple(other[len(other) - len(w):]) == tuple(w)
