"""Inverted-index BM25 ranking and the query-construction variants.

Scoring follows the standard Robertson formulation:

    score(Q, p) = sum_t IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avglen))
    IDF(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))

with k1 = 1.2, b = 0.75 by default. Query bags keep duplicates: a term
occurring twice in the query contributes twice.

Three query builders turn a mention-bearing passage into a term bag:
full context, the mention's sentence, or the mention plus salient context
tokens (capitalized-in-raw-text or numeric, non-stopword) — the last being a
deterministic stand-in for named-entity extraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import CorpusSplit, Passage
from .errors import NotFoundError, ValidationError
from .textproc import Tokenizer

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_SENTENCE_FINAL = frozenset({".", "!", "?"})

DEFAULT_STOPWORDS = frozenset(
    """a an the and or but if then than so such as of in on at to for with by
    from into through over under between during before after above below up
    down out off again further once here there when where why how which who
    whom what this that these those is are was were be been being have has
    had having do does did doing will would shall should can could may might
    must not no nor only own same too very just about against all any both
    each few more most other some it its itself he him his himself she her
    hers herself they them their theirs themselves we us our ours ourselves
    you your yours yourself i me my mine myself""".split()
)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One word per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


class QueryBuilderKind(Enum):
    FULL_CONTEXT = "full_context"
    MENTION_SENTENCE = "mention_sentence"
    MENTION_PLUS_SALIENT = "mention_plus_salient"


@dataclass
class InvertedIndex:
    postings: dict[str, dict[str, int]]  # term -> {passage id -> tf}, ids ascending
    doc_len: dict[str, int]
    avg_len: float
    n_docs: int

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return float(np.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5)))


def build_bm25_index(passages: list[Passage] | CorpusSplit, tokenizer: Tokenizer) -> InvertedIndex:
    if isinstance(passages, CorpusSplit):
        passages = list(passages.passages.values())
    if not passages:
        raise ValidationError("cannot build an index over zero passages")
    postings: dict[str, dict[str, int]] = {}
    doc_len: dict[str, int] = {}
    for p in passages:
        tokens = p.tokens(tokenizer)
        doc_len[p.id] = len(tokens)
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            postings.setdefault(t, {})[p.id] = tf
    for t in postings:
        postings[t] = dict(sorted(postings[t].items()))
    avg_len = sum(doc_len.values()) / len(doc_len)
    return InvertedIndex(postings=postings, doc_len=doc_len, avg_len=avg_len, n_docs=len(doc_len))


def bm25_score(
    terms: list[str],
    passage_id: str,
    index: InvertedIndex,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    if passage_id not in index.doc_len:
        raise NotFoundError(f"unknown passage id {passage_id!r}")
    norm = 1.0 - b + b * index.doc_len[passage_id] / index.avg_len
    score = 0.0
    for term in terms:
        tf = index.postings.get(term, {}).get(passage_id, 0)
        if tf == 0:
            continue
        score += index.idf(term) * tf * (k1 + 1.0) / (tf + k1 * norm)
    return score


def _full_context(query: Passage, tokenizer: Tokenizer) -> list[str]:
    return list(query.tokens(tokenizer))


def _mention_sentence(query: Passage, tokenizer: Tokenizer) -> list[str]:
    tokens = query.tokens(tokenizer)
    sentence_of: list[int] = []
    current = 0
    for tok in tokens:
        sentence_of.append(current)
        if tok in _SENTENCE_FINAL:
            current += 1
    span = query.mention
    covered = set(sentence_of[span.start : span.end + 1])
    return [t for i, t in enumerate(tokens) if sentence_of[i] in covered]


def _mention_plus_salient(
    query: Passage, tokenizer: Tokenizer, stopwords: frozenset[str]
) -> list[str]:
    tokens = query.tokens(tokenizer)
    alignment = query.alignment(tokenizer)
    raw = tokenizer.normalize(query.text)
    span = query.mention
    bag = list(tokens[span.start : span.end + 1])
    for i, tok in enumerate(tokens):
        if span.start <= i <= span.end:
            continue
        if tok in stopwords:
            continue
        start, end = alignment[i]
        if raw[start:end][:1].isupper() or tok.isdigit():
            bag.append(tok)
    return bag


def build_query_terms(
    query: Passage,
    kind: QueryBuilderKind,
    tokenizer: Tokenizer,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> list[str]:
    if kind is not QueryBuilderKind.FULL_CONTEXT and query.mention is None:
        raise ValidationError(f"query passage {query.id!r} has no mention span")
    if kind is QueryBuilderKind.FULL_CONTEXT:
        return _full_context(query, tokenizer)
    if kind is QueryBuilderKind.MENTION_SENTENCE:
        return _mention_sentence(query, tokenizer)
    return _mention_plus_salient(query, tokenizer, stopwords)


def rank_terms(
    terms: list[str],
    index: InvertedIndex,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> list[tuple[str, float]]:
    """Rank passages for a prepared term bag: descending score, ties by
    ascending id; zero-score passages fill the tail in id order when k
    exceeds the matching set."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not terms:
        return []
    counts: dict[str, int] = {}
    for t in terms:
        counts[t] = counts.get(t, 0) + 1
    scores: dict[str, float] = {}
    for term, multiplicity in counts.items():
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = index.idf(term)
        for pid, tf in posting.items():
            norm = 1.0 - b + b * index.doc_len[pid] / index.avg_len
            scores[pid] = scores.get(pid, 0.0) + multiplicity * idf * tf * (k1 + 1.0) / (
                tf + k1 * norm
            )
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < k:
        matched = set(scores)
        ranked.extend((pid, 0.0) for pid in sorted(index.doc_len) if pid not in matched)
    return ranked[:k]


def bm25_top_k(
    query: Passage,
    kind: QueryBuilderKind,
    index: InvertedIndex,
    k: int,
    tokenizer: Tokenizer,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> list[tuple[str, float]]:
    terms = build_query_terms(query, kind, tokenizer, stopwords)
    return rank_terms(terms, index, k, k1, b)


def bm25_run(
    split: CorpusSplit,
    index: InvertedIndex,
    kind: QueryBuilderKind,
    k: int,
    tokenizer: Tokenizer,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> dict[str, list[tuple[str, float]]]:
    """Rank the collection for every query in the split; a query never
    retrieves its own passage."""
    run: dict[str, list[tuple[str, float]]] = {}
    for qid in sorted(split.queries):
        ranked = bm25_top_k(
            split.passage(qid),
            kind,
            index,
            min(k + 1, index.n_docs),
            tokenizer,
            stopwords,
            k1,
            b,
        )
        run[qid] = [(pid, s) for pid, s in ranked if pid != qid][:k]
    return run
