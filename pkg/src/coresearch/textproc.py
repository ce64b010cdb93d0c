"""Deterministic tokenizer, vocabulary, and special-token management.

Word-level tokenization only: lowercased (configurable), split on whitespace
with every punctuation character becoming its own token. Marker tokens are
case-sensitive reserved strings that the tokenizer can never produce from
raw text (angle brackets always split), so they cannot collide with corpus
vocabulary.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .corpus import MentionSpan
from .errors import ValidationError

PAD = "[PAD]"
UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
MENTION_OPEN = "<S>"
MENTION_CLOSE = "<\\S>"
QSPAN_OPEN = "<QSPAN-START>"
QSPAN_CLOSE = "<QSPAN-END>"

RESERVED = (PAD, UNK, CLS, SEP, MENTION_OPEN, MENTION_CLOSE, QSPAN_OPEN, QSPAN_CLOSE)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class MarkStyle(Enum):
    """Which boundary-token pair wraps a mention span."""

    RETRIEVER_S = (MENTION_OPEN, MENTION_CLOSE)
    READER_QSPAN = (QSPAN_OPEN, QSPAN_CLOSE)

    @property
    def open(self) -> str:
        return self.value[0]

    @property
    def close(self) -> str:
        return self.value[1]


@dataclass(frozen=True)
class TokenizedText:
    """Tokens plus per-token (char_start, char_end) offsets into the text.

    Offsets refer to the NFC-normalized input string; special tokens carry
    an empty (i, i) alignment.
    """

    tokens: tuple[str, ...]
    alignment: tuple[tuple[int, int], ...]


class Tokenizer:
    def __init__(self, lowercase: bool = True):
        self.lowercase = lowercase

    @property
    def version(self) -> str:
        return "ws-punct-lower-1" if self.lowercase else "ws-punct-1"

    def tokenize(self, text: str) -> TokenizedText:
        text = unicodedata.normalize("NFC", text)
        tokens: list[str] = []
        alignment: list[tuple[int, int]] = []
        for m in _TOKEN_RE.finditer(text):
            tok = m.group(0)
            tokens.append(tok.lower() if self.lowercase else tok)
            alignment.append((m.start(), m.end()))
        return TokenizedText(tuple(tokens), tuple(alignment))

    def normalize(self, text: str) -> str:
        """The NFC form the alignment offsets refer to."""
        return unicodedata.normalize("NFC", text)


def char_range_to_token_span(
    alignment: Iterable[tuple[int, int]], char_start: int, char_end: int
) -> MentionSpan | None:
    """Map a character range [char_start, char_end) to the covered token span.

    A token is covered when it overlaps the range. Returns None when no token
    overlaps (e.g. the range falls inside whitespace).
    """
    hit = [i for i, (s, e) in enumerate(alignment) if s < char_end and e > char_start]
    if not hit:
        return None
    return MentionSpan(hit[0], hit[-1])


class Vocabulary:
    """Injective token -> id mapping with a fixed reserved-id block.

    Corpus tokens are ordered by descending frequency then lexicographically,
    making two builds over the same corpus identical. Persisted as a text
    file, one corpus token per line; line number = id - len(RESERVED).
    """

    def __init__(self, corpus_tokens: Iterable[str]):
        self._id: dict[str, int] = {tok: i for i, tok in enumerate(RESERVED)}
        for tok in corpus_tokens:
            if tok in self._id:
                raise ValidationError(f"token {tok!r} duplicates a vocabulary entry")
            self._id[tok] = len(self._id)
        self._tokens = list(self._id)

    @classmethod
    def build(cls, token_seqs: Iterable[Iterable[str]]) -> "Vocabulary":
        counts: Counter[str] = Counter()
        for seq in token_seqs:
            counts.update(seq)
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ordered)

    def __len__(self) -> int:
        return len(self._id)

    def __contains__(self, token: str) -> bool:
        return token in self._id

    def id(self, token: str) -> int:
        return self._id.get(token, self._id[UNK])

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        unk = self._id[UNK]
        return [self._id.get(t, unk) for t in tokens]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self._tokens[len(RESERVED) :]:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls(line.rstrip("\n") for line in fh if line.rstrip("\n"))


def mark_mention(
    tokens: Iterable[str], span: MentionSpan, style: MarkStyle
) -> tuple[list[str], MentionSpan]:
    """Insert boundary tokens around the span; returns the remapped span."""
    tokens = list(tokens)
    if span.end >= len(tokens):
        raise ValidationError(f"span ({span.start}, {span.end}) outside {len(tokens)} tokens")
    marked = (
        tokens[: span.start]
        + [style.open]
        + tokens[span.start : span.end + 1]
        + [style.close]
        + tokens[span.end + 1 :]
    )
    return marked, MentionSpan(span.start + 1, span.end + 1)


def unmark_mention(
    tokens: Iterable[str], span: MentionSpan, style: MarkStyle
) -> tuple[list[str], MentionSpan]:
    """Inverse of mark_mention."""
    tokens = list(tokens)
    if span.start < 1 or span.end >= len(tokens) - 1:
        raise ValidationError("span does not leave room for boundary tokens")
    if tokens[span.start - 1] != style.open or tokens[span.end + 1] != style.close:
        raise ValidationError("boundary tokens not found around span")
    unmarked = tokens[: span.start - 1] + tokens[span.start : span.end + 1] + tokens[span.end + 2 :]
    return unmarked, MentionSpan(span.start - 1, span.end - 1)


def truncate(
    tokens: Iterable[str], max_len: int, span: MentionSpan | None = None
) -> tuple[list[str], MentionSpan | None]:
    """Cut a token sequence to at most max_len tokens.

    Plain prefix by default; when a span would be cut off, the window is
    recentered so the full span survives, and the remapped span is returned.
    """
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    tokens = list(tokens)
    if len(tokens) <= max_len:
        return tokens, span
    if span is None or span.end < max_len:
        return tokens[:max_len], span
    if len(span) > max_len:
        raise ValidationError(f"span of {len(span)} tokens cannot fit in window of {max_len}")
    mid = (span.start + span.end) // 2
    ws = mid - max_len // 2
    ws = max(ws, span.end - max_len + 1, 0)
    ws = min(ws, span.start, len(tokens) - max_len)
    window = tokens[ws : ws + max_len]
    return window, MentionSpan(span.start - ws, span.end - ws)
