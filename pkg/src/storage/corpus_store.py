"""
Corpus text files.

Format (UTF-8):

    # comment lines start with '#'
    alphabet: 0 1 2 3 4
    0 1 4 4 2 ...        <- group 1
    3 3 0 1 ...          <- group 2

The header declares whitespace-separated symbol tokens; every following
nonempty, non-comment line is one group's sequence.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

from src.config.exceptions import ErrorCode, SystemError, data_error
from src.core.alphabet import Alphabet
from src.counting.count_trie import GroupSample
from src.utils.error_handler import handle_exceptions

logger = logging.getLogger(__name__)

HEADER_KEY = "alphabet:"


def _tokens_with_columns(line: str):
    """(token, 1-based column) pairs of a whitespace-separated line."""
    column = 0
    for token in line.split():
        column = line.index(token, column)
        yield token, column + 1
        column += len(token)


def parse_corpus_text(text: str, source: str = "<string>") -> GroupSample:
    """Parse corpus text; ``source`` only labels error messages."""
    alphabet: Optional[Alphabet] = None
    groups: List[List[int]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if alphabet is None:
            if not line.startswith(HEADER_KEY):
                raise data_error(
                    f"{source}:{number}: expected header 'alphabet: s1 s2 ...'",
                    ErrorCode.CORPUS_HEADER_INVALID,
                    source=source,
                    line=number
                )
            symbols = line[len(HEADER_KEY):].split()
            alphabet = Alphabet(tuple(symbols))
            continue
        sequence = []
        for token, column in _tokens_with_columns(raw):
            if token not in alphabet.symbols:
                raise data_error(
                    f"{source}:{number}:{column}: unknown token '{token}'",
                    ErrorCode.CORPUS_UNKNOWN_TOKEN,
                    source=source,
                    line=number,
                    column=column,
                    token=token
                )
            sequence.append(alphabet.index(token))
        groups.append(sequence)

    if alphabet is None:
        raise data_error(f"{source}: missing alphabet header", ErrorCode.CORPUS_HEADER_INVALID, source=source)
    if not groups:
        raise data_error(f"{source}: corpus has no sequences", ErrorCode.CORPUS_EMPTY, source=source)
    return GroupSample(alphabet, tuple(groups))


def parse_corpus(path: Union[str, Path]) -> GroupSample:
    """
    Read a corpus file into a GroupSample.

    Raises:
        DataError: missing file, bad header, unknown token (with line and
            column) or empty body
    """
    path = Path(path)
    if not path.exists():
        raise data_error(f"Corpus file not found: {path}", ErrorCode.CORPUS_NOT_FOUND, path=str(path))
    sample = parse_corpus_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.info(
        "Corpus loaded",
        extra={"path": str(path), "groups": sample.group_count, "alphabet_size": sample.alphabet.size}
    )
    return sample


def format_corpus(sample: GroupSample, comment: Optional[str] = None) -> str:
    alphabet = sample.alphabet
    lines = []
    if comment:
        lines.extend(f"# {part}" for part in comment.splitlines())
    lines.append(f"{HEADER_KEY} {' '.join(alphabet.symbols)}")
    for sequence in sample.sequences:
        lines.append(" ".join(alphabet.decode(sequence.tolist())))
    return "\n".join(lines) + "\n"


@handle_exceptions(SystemError, ErrorCode.OUTPUT_WRITE_FAILED, catch=(OSError,))
def write_corpus(sample: GroupSample, path: Union[str, Path], comment: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_corpus(sample, comment), encoding="utf-8")
    logger.debug("Corpus written", extra={"path": str(path), "groups": sample.group_count})
    return path
