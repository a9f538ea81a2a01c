"""Pluggable text tokenizers.

Token ids are opaque to the rest of the package. The reference tokenizer
splits on whitespace and hashes each unit with CRC-32, so ids are stable
across processes and platforms without shipping a vocabulary file.
"""

from __future__ import annotations

import zlib
from typing import Callable, Dict, List, Protocol, runtime_checkable


@runtime_checkable
class Tokenizer(Protocol):
    def tokenize(self, text: str) -> List[int]: ...


class WhitespaceTokenizer:
    """One token per whitespace-separated unit; id = CRC-32 of the unit."""

    name = "whitespace"

    def __init__(self) -> None:
        # reverse map filled on the fly so tests can decode placed chain blocks
        self._seen: Dict[int, str] = {}

    def tokenize(self, text: str) -> List[int]:
        ids = []
        for unit in text.split():
            token_id = zlib.crc32(unit.encode("utf-8"))
            self._seen[token_id] = unit
            ids.append(token_id)
        return ids

    def decode(self, ids: List[int]) -> str:
        try:
            return " ".join(self._seen[i] for i in ids)
        except KeyError as exc:
            raise KeyError(f"token id {exc.args[0]} was never produced by this tokenizer") from None


class CharTokenizer:
    """One token per non-whitespace character; id = Unicode code point."""

    name = "char"

    def tokenize(self, text: str) -> List[int]:
        return [ord(ch) for ch in text if not ch.isspace()]

    def decode(self, ids: List[int]) -> str:
        return "".join(chr(i) for i in ids)


TOKENIZERS: Dict[str, Callable[[], Tokenizer]] = {
    WhitespaceTokenizer.name: WhitespaceTokenizer,
    CharTokenizer.name: CharTokenizer,
}

DEFAULT_TOKENIZER = WhitespaceTokenizer.name


def get_tokenizer(name: str = DEFAULT_TOKENIZER) -> Tokenizer:
    try:
        factory = TOKENIZERS[name]
    except KeyError:
        known = ", ".join(sorted(TOKENIZERS))
        raise KeyError(f"unknown tokenizer {name!r} (known: {known})") from None
    return factory()
