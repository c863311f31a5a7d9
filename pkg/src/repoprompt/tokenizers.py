"""Token counting and budget truncation.

Two interchangeable tokenizers are provided:

* ``ByteLevelBpeTokenizer``: byte-level BPE in the GPT-2 file format,
  loaded from ``vocab.json`` + ``merges.txt`` bundled with the package.
* ``FallbackTokenizer``: counts word and punctuation chunks with a
  regex; whitespace costs nothing.

Both expose ``count`` plus ``truncate_front`` / ``truncate_back``.
Truncation drops whole tokens from the stated end and re-checks the
count after every cut, so the returned text always fits the budget even
when re-tokenization changes chunk boundaries.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

_FALLBACK_RE = re.compile(r"\w+|[^\w\s]")

# Mirrors the GPT-2 split pattern using re-compatible classes: letters,
# digits, runs of symbols (underscore included), and whitespace.
_BPE_SPLIT_RE = re.compile(
    r"'s|'t|'re|'ve|'m|'ll|'d"
    r"| ?[^\W\d_]+| ?\d+| ?(?:[^\s\w]|_)+"
    r"|\s+(?!\S)|\s+"
)


class FallbackTokenizer:
    """Regex tokenizer: one token per word or punctuation chunk."""

    name = "fallback"

    def count(self, text: str) -> int:
        return len(_FALLBACK_RE.findall(text))

    def truncate_front(self, text: str, budget: int) -> str:
        """Drop leading tokens until at most ``budget`` remain."""
        if budget < 0:
            raise ValueError("budget must be non-negative")
        matches = list(_FALLBACK_RE.finditer(text))
        if len(matches) <= budget:
            return text
        if budget == 0:
            return ""
        return text[matches[len(matches) - budget].start():]

    def truncate_back(self, text: str, budget: int) -> str:
        """Drop trailing tokens until at most ``budget`` remain."""
        if budget < 0:
            raise ValueError("budget must be non-negative")
        matches = list(_FALLBACK_RE.finditer(text))
        if len(matches) <= budget:
            return text
        if budget == 0:
            return ""
        return text[:matches[budget - 1].end()]


@lru_cache(maxsize=1)
def byte_unicode_table() -> dict[int, str]:
    """Map every byte to a printable unicode character.

    Printable bytes map to themselves; the rest are shifted into the
    256+ range so tokens stay visible in the vocab file.
    """
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    chars = keep[:]
    shift = 0
    for b in range(256):
        if b not in keep:
            keep.append(b)
            chars.append(256 + shift)
            shift += 1
    return dict(zip(keep, (chr(c) for c in chars)))


class ByteLevelBpeTokenizer:
    """Byte-level BPE over GPT-2-format vocab and merges files."""

    name = "bpe"

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]]):
        self._vocab = vocab
        self._inverse = {i: tok for tok, i in vocab.items()}
        self._ranks = {pair: rank for rank, pair in enumerate(merges)}
        table = byte_unicode_table()
        self._byte_encoder = table
        self._byte_decoder = {c: b for b, c in table.items()}
        self._cache: dict[str, list[str]] = {}

    @classmethod
    def bundled(cls) -> "ByteLevelBpeTokenizer":
        root = resources.files("repoprompt").joinpath("data", "bpe")
        vocab = json.loads(root.joinpath("vocab.json").read_text("utf-8"))
        merges: list[tuple[str, str]] = []
        for line in root.joinpath("merges.txt").read_text("utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            left, right = line.split(" ")
            merges.append((left, right))
        return cls(vocab, merges)

    def _bpe(self, chunk: str) -> list[str]:
        cached = self._cache.get(chunk)
        if cached is not None:
            return cached
        parts = list(chunk)
        while len(parts) > 1:
            pairs = {(parts[i], parts[i + 1]) for i in range(len(parts) - 1)}
            best = min(pairs, key=lambda p: self._ranks.get(p, float("inf")))
            if best not in self._ranks:
                break
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if (
                    i < len(parts) - 1
                    and parts[i] == best[0]
                    and parts[i + 1] == best[1]
                ):
                    merged.append(parts[i] + parts[i + 1])
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        self._cache[chunk] = parts
        return parts

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for chunk in _BPE_SPLIT_RE.findall(text):
            mapped = "".join(self._byte_encoder[b] for b in chunk.encode("utf-8"))
            for token in self._bpe(mapped):
                ids.append(self._vocab[token])
        return ids

    def decode(self, ids: list[int]) -> str:
        data = bytes(
            self._byte_decoder[c] for i in ids for c in self._inverse[i]
        )
        return data.decode("utf-8", errors="replace")

    def count(self, text: str) -> int:
        return len(self.encode(text))

    def _truncate(self, text: str, budget: int, front: bool) -> str:
        if budget < 0:
            raise ValueError("budget must be non-negative")
        ids = self.encode(text)
        while len(ids) > budget:
            # Dropping ids and re-encoding can shift chunk boundaries,
            # so repeat until the decoded text itself fits.
            ids = ids[len(ids) - budget:] if front else ids[:budget]
            candidate = self.decode(ids)
            ids = self.encode(candidate)
            if len(ids) > budget:
                ids = ids[1:] if front else ids[:-1]
                candidate = self.decode(ids)
                ids = self.encode(candidate)
            text = candidate
        return text if ids else ""

    def truncate_front(self, text: str, budget: int) -> str:
        return self._truncate(text, budget, front=True)

    def truncate_back(self, text: str, budget: int) -> str:
        return self._truncate(text, budget, front=False)


Tokenizer = FallbackTokenizer | ByteLevelBpeTokenizer

_BUNDLED: dict[str, Tokenizer] = {}


def get_tokenizer(name: str) -> Tokenizer:
    """Return a shared tokenizer instance by name (``bpe``/``fallback``)."""
    if name not in ("bpe", "fallback"):
        raise ValueError(f"unknown tokenizer {name!r}")
    if name not in _BUNDLED:
        _BUNDLED[name] = (
            ByteLevelBpeTokenizer.bundled() if name == "bpe" else FallbackTokenizer()
        )
    return _BUNDLED[name]
