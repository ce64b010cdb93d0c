"""Core domain types and the JSONL corpus interchange format.

A corpus split is a flat collection of passages. Annotated passages carry a
gold mention span (token indices, inclusive) and a cluster id; passages
sharing a cluster id corefer. Destructor passages are unannotated
distractors that are guaranteed not to corefer with any annotated query.
Every annotated passage doubles as a query whose positives are its
co-cluster members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .errors import NotFoundError, ParseError, ValidationError


class ClusterType(Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class MentionSpan:
    """Token-index span, inclusive on both ends."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValidationError(f"invalid span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass
class Passage:
    """A tokenized text unit, optionally carrying a gold event mention.

    Token sequences are derived lazily from the raw text and cached per
    tokenizer version; the raw string is the stored source of truth.
    """

    id: str
    text: str
    mention: MentionSpan | None = None
    cluster_id: str | None = None
    is_destructor: bool = False
    _token_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def tokens(self, tokenizer) -> list[str]:
        cached = self._token_cache.get(tokenizer.version)
        if cached is None:
            cached = tokenizer.tokenize(self.text).tokens
            self._token_cache[tokenizer.version] = cached
        return cached

    def alignment(self, tokenizer) -> list[tuple[int, int]]:
        return tokenizer.tokenize(self.text).alignment

    def mention_text(self, tokenizer) -> str:
        """Surface form of the gold mention (tokens joined by spaces)."""
        if self.mention is None:
            raise ValidationError(f"passage {self.id!r} has no mention")
        toks = self.tokens(tokenizer)
        return " ".join(toks[self.mention.start : self.mention.end + 1])

    def mention_char_span(self, tokenizer) -> tuple[int, int]:
        """Character offsets (start, end-exclusive) of the gold mention."""
        if self.mention is None:
            raise ValidationError(f"passage {self.id!r} has no mention")
        align = self.alignment(tokenizer)
        return align[self.mention.start][0], align[self.mention.end][1]


@dataclass(frozen=True)
class CoreferenceCluster:
    cluster_id: str
    passage_ids: frozenset[str]
    cluster_type: ClusterType = ClusterType.UNKNOWN

    def __post_init__(self):
        if len(self.passage_ids) < 2:
            raise ValidationError(
                f"cluster {self.cluster_id!r} is a singleton ({len(self.passage_ids)} member)"
            )


class CorpusSplit:
    """One search split: a passage collection plus its derived cluster map.

    Immutable after construction; safe to share read-only across threads.
    """

    def __init__(self, name: str, passages: Iterable[Passage], tokenizer=None):
        if name not in ("train", "dev", "test"):
            raise ValidationError(f"unknown split name {name!r}")
        self.name = name
        self.passages: dict[str, Passage] = {}
        by_cluster: dict[str, set[str]] = {}
        for p in passages:
            if p.id in self.passages:
                raise ValidationError(f"duplicate passage id {p.id!r}")
            self.passages[p.id] = p
            if p.cluster_id is not None:
                by_cluster.setdefault(p.cluster_id, set()).add(p.id)
        self.clusters: dict[str, CoreferenceCluster] = {
            cid: CoreferenceCluster(cid, frozenset(ids)) for cid, ids in by_cluster.items()
        }
        self.queries: list[str] = [p.id for p in self.passages.values() if p.mention is not None]
        self._validate(tokenizer)

    def _validate(self, tokenizer):
        if tokenizer is None:
            from .textproc import Tokenizer

            tokenizer = Tokenizer()
        for p in self.passages.values():
            if p.is_destructor and (p.mention is not None or p.cluster_id is not None):
                raise ValidationError(f"destructor passage {p.id!r} carries annotations")
            if p.mention is not None:
                n = len(p.tokens(tokenizer))
                if p.mention.end >= n:
                    raise ValidationError(
                        f"passage {p.id!r}: mention ({p.mention.start}, {p.mention.end}) "
                        f"outside {n} tokens"
                    )
                if p.cluster_id is None:
                    raise ValidationError(f"passage {p.id!r} has a mention but no cluster id")
            elif p.cluster_id is not None:
                raise ValidationError(f"passage {p.id!r} has a cluster id but no mention")

    def __len__(self) -> int:
        return len(self.passages)

    def passage(self, passage_id: str) -> Passage:
        try:
            return self.passages[passage_id]
        except KeyError:
            raise NotFoundError(f"unknown passage id {passage_id!r}") from None

    def positives_for(self, query_id: str) -> set[str]:
        """Co-cluster members of the query, excluding the query itself."""
        p = self.passage(query_id)
        if p.cluster_id is None:
            raise NotFoundError(f"passage {query_id!r} is not an annotated query")
        return set(self.clusters[p.cluster_id].passage_ids) - {query_id}


# JSONL schema, one passage per line:
#   {"id": str, "text": str, "mention": {"start": int, "end": int} | null,
#    "cluster_id": str | null, "is_destructor": bool}
# UTF-8, LF-terminated; the writer emits keys in exactly this order so that
# load -> write round-trips byte-identically.

_SCHEMA_KEYS = ("id", "text", "mention", "cluster_id", "is_destructor")


def passage_to_dict(p: Passage) -> dict:
    return {
        "id": p.id,
        "text": p.text,
        "mention": None if p.mention is None else {"start": p.mention.start, "end": p.mention.end},
        "cluster_id": p.cluster_id,
        "is_destructor": p.is_destructor,
    }


def passage_from_dict(rec: dict, line: int | None = None) -> Passage:
    missing = [k for k in _SCHEMA_KEYS if k not in rec]
    if missing:
        raise ParseError(f"missing keys {missing}", line)
    mention = rec["mention"]
    span = None
    if mention is not None:
        try:
            span = MentionSpan(int(mention["start"]), int(mention["end"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad mention object: {exc}", line) from None
    return Passage(
        id=str(rec["id"]),
        text=str(rec["text"]),
        mention=span,
        cluster_id=rec["cluster_id"],
        is_destructor=bool(rec["is_destructor"]),
    )


def load_corpus(path: str | Path, name: str | None = None, tokenizer=None) -> CorpusSplit:
    """Load one split from a JSONL file, validating every invariant.

    The split name defaults to the file stem (train/dev/test).
    """
    path = Path(path)
    if name is None:
        name = path.stem
    passages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc.msg}", lineno) from None
            passages.append(passage_from_dict(rec, lineno))
    return CorpusSplit(name, passages, tokenizer=tokenizer)


def write_corpus(split: CorpusSplit, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_passages(split.passages.values(), fh)


def write_passages(passages: Iterable[Passage], fh: IO[str]) -> None:
    for p in passages:
        fh.write(json.dumps(passage_to_dict(p), ensure_ascii=False, separators=(",", ":")))
        fh.write("\n")
