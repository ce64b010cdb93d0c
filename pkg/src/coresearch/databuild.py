"""Dataset construction: real-data split building and synthetic corpora.

Real data arrives as JSONL cluster records ({"cluster_id", "passages": [...]})
plus raw distractor paragraphs ({"text", "links": [str]}). Paragraphs linking
into any annotated cluster are filtered out; survivors become destructor
passages. Clusters are partitioned disjointly across train/dev/test by a
seeded permutation — a cluster never straddles splits.

The synthetic generator builds desk-scale corpora with a known answer key:
every cluster is a unique (event type, location, year) triple. Type-1
passages embed all three arguments inside the mention span; Type-2 passages
mention only the bare event word and push the arguments into surrounding
context. Destructor passages reuse event words with arguments drawn from a
disjoint pool, so lexical match on the event word alone cannot separate
clusters, while each cluster's argument tokens are shared only within it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import (
    ClusterType,
    CoreferenceCluster,
    CorpusSplit,
    MentionSpan,
    Passage,
)
from .errors import ConfigError, ParseError, ValidationError
from .textproc import Tokenizer

SPLIT_NAMES = ("train", "dev", "test")

MONTH_NAMES = frozenset(
    (
        "january", "february", "march", "april", "may", "june",
        "july", "august", "september", "october", "november", "december",
    )
)


# ---------------------------------------------------------------------------
# Ingestion records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterRecord:
    """One annotated coreference cluster with its member passages."""

    cluster_id: str
    passages: tuple[Passage, ...]


@dataclass(frozen=True)
class RawParagraph:
    """A candidate distractor paragraph with outbound link targets."""

    text: str
    links: tuple[str, ...] = ()
    id: str | None = None


def load_cluster_records(path: str | Path) -> list[ClusterRecord]:
    """JSONL, one cluster per line:
    {"cluster_id": str, "passages": [{"id", "text", "mention": {"start", "end"}}]}.
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", lineno) from None
            try:
                cid = str(rec["cluster_id"])
                members = tuple(
                    Passage(
                        id=str(p["id"]),
                        text=str(p["text"]),
                        mention=MentionSpan(int(p["mention"]["start"]), int(p["mention"]["end"])),
                        cluster_id=cid,
                    )
                    for p in rec["passages"]
                )
            except (KeyError, TypeError) as exc:
                raise ParseError(f"bad cluster record: {exc}", lineno) from None
            records.append(ClusterRecord(cluster_id=cid, passages=members))
    return records


def load_raw_paragraphs(path: str | Path) -> list[RawParagraph]:
    """JSONL, one paragraph per line: {"text": str, "links": [str]?, "id": str?}.

    A missing "links" field means the paragraph is link-free.
    """
    paragraphs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", lineno) from None
            if "text" not in rec:
                raise ParseError("paragraph record lacks 'text'", lineno)
            links = tuple(str(t) for t in rec.get("links", ()))
            pid = str(rec["id"]) if "id" in rec else None
            paragraphs.append(RawParagraph(text=str(rec["text"]), links=links, id=pid))
    return paragraphs


def wec_record_to_passage(record: dict) -> Passage:
    """Convert one WEC-Eng-shaped mention record to a Passage.

    Expected shape:
      {"mention_id": str|int, "coref_chain": str|int,
       "mention_context": [str, ...],        # passage as a token list
       "tokens_number": [int, ...]}          # mention token indices, ascending

    The context tokens are joined with single spaces; the mention span is
    re-derived through this package's tokenizer via character offsets, so a
    context token that splits further (e.g. "U.S.") still maps correctly.
    """
    from .textproc import char_range_to_token_span

    context = [str(t) for t in record["mention_context"]]
    positions = sorted(int(i) for i in record["tokens_number"])
    if not context or not positions:
        raise ValidationError("empty mention_context or tokens_number")
    if positions[-1] >= len(context):
        raise ValidationError("tokens_number outside mention_context")
    text = " ".join(context)
    char_start = sum(len(t) + 1 for t in context[: positions[0]])
    char_end = sum(len(t) + 1 for t in context[: positions[-1]]) + len(context[positions[-1]])
    tokenizer = Tokenizer()
    span = char_range_to_token_span(tokenizer.tokenize(text).alignment, char_start, char_end)
    if span is None:
        raise ValidationError("mention maps to zero tokens")
    return Passage(
        id=str(record["mention_id"]),
        text=text,
        mention=span,
        cluster_id=str(record["coref_chain"]),
    )


# ---------------------------------------------------------------------------
# Destructor filtering and split building
# ---------------------------------------------------------------------------


def filter_destructors(
    raw_paragraphs: Iterable[RawParagraph],
    annotated_clusters: Iterable[ClusterRecord],
) -> list[Passage]:
    """Drop paragraphs with any outbound link into an annotated cluster
    (by cluster id or member passage id); survivors become destructors."""
    targets: set[str] = set()
    for cluster in annotated_clusters:
        targets.add(cluster.cluster_id)
        targets.update(p.id for p in cluster.passages)
    survivors = []
    for i, para in enumerate(raw_paragraphs):
        if any(link in targets for link in para.links):
            continue
        survivors.append(
            Passage(
                id=para.id if para.id is not None else f"d{i:06d}",
                text=para.text,
                is_destructor=True,
            )
        )
    return survivors


@dataclass(frozen=True)
class BuildConfig:
    split_cluster_counts: Mapping[str, int]
    seed: int = 0
    destructor_sources: tuple[str, ...] = ()
    min_cluster_size: int = 2

    def __post_init__(self) -> None:
        missing = [s for s in SPLIT_NAMES if s not in self.split_cluster_counts]
        if missing:
            raise ConfigError(f"split_cluster_counts lacks {missing}")
        if any(self.split_cluster_counts[s] < 0 for s in SPLIT_NAMES):
            raise ConfigError("split cluster counts must be non-negative")
        if self.min_cluster_size < 2:
            raise ConfigError("min_cluster_size must be at least 2")


def _largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    """Integer apportionment of `total` by `fractions` (ties to lower index)."""
    raw = [total * f for f in fractions]
    counts = [math.floor(r) for r in raw]
    leftovers = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:leftovers]:
        counts[i] += 1
    return counts


def build_splits(
    clusters: Sequence[ClusterRecord],
    destructor_pool: Sequence[Passage],
    cfg: BuildConfig,
) -> dict[str, CorpusSplit]:
    """Partition clusters disjointly across splits by a seeded permutation.

    The requested counts must sum to the number of available clusters.
    Destructors are apportioned to splits proportionally to cluster counts
    (largest remainder), also by seeded permutation.
    """
    seen: set[str] = set()
    for cluster in clusters:
        if cluster.cluster_id in seen:
            raise ValidationError(f"duplicate cluster id {cluster.cluster_id!r}")
        seen.add(cluster.cluster_id)
        if len(cluster.passages) < cfg.min_cluster_size:
            raise ValidationError(
                f"cluster {cluster.cluster_id!r} has {len(cluster.passages)} member(s); "
                f"minimum is {cfg.min_cluster_size}"
            )
    counts = [cfg.split_cluster_counts[s] for s in SPLIT_NAMES]
    if sum(counts) != len(clusters):
        raise ConfigError(
            f"split counts {counts} sum to {sum(counts)} but {len(clusters)} "
            f"clusters are available"
        )
    rng = np.random.default_rng(cfg.seed)
    by_id = {c.cluster_id: c for c in clusters}
    ordered_ids = sorted(by_id)
    cluster_order = [ordered_ids[i] for i in rng.permutation(len(ordered_ids))]

    destructors = sorted(destructor_pool, key=lambda p: p.id)
    destructor_order = [destructors[i] for i in rng.permutation(len(destructors))]
    total_clusters = max(1, len(clusters))
    destructor_counts = _largest_remainder(
        len(destructors), [c / total_clusters for c in counts]
    )

    splits: dict[str, CorpusSplit] = {}
    c_lo = d_lo = 0
    for name, c_n, d_n in zip(SPLIT_NAMES, counts, destructor_counts):
        passages: list[Passage] = []
        for cid in cluster_order[c_lo : c_lo + c_n]:
            passages.extend(by_id[cid].passages)
        passages.extend(destructor_order[d_lo : d_lo + d_n])
        splits[name] = CorpusSplit(name, passages)
        c_lo += c_n
        d_lo += d_n
    return splits


# ---------------------------------------------------------------------------
# Cluster taxonomy
# ---------------------------------------------------------------------------


def load_gazetteer(path: str | Path) -> frozenset[str]:
    """One location token per line; matching is on lowercased tokens."""
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def _is_argument_token(token: str, gazetteer: frozenset[str]) -> bool:
    return (
        (len(token) == 4 and token.isdigit())
        or token in MONTH_NAMES
        or token in gazetteer
    )


def classify_cluster_type(
    cluster: CoreferenceCluster,
    passages: Mapping[str, Passage],
    tokenizer: Tokenizer | None = None,
    gazetteer: frozenset[str] = frozenset(),
) -> ClusterType:
    """Type-1 iff every member's mention span contains a time or location
    token (4-digit year, month name, or gazetteer entry); else Type-2."""
    tokenizer = tokenizer if tokenizer is not None else Tokenizer()
    for pid in sorted(cluster.passage_ids):
        passage = passages[pid]
        if passage.mention is None:
            raise ValidationError(f"cluster member {pid!r} has no mention span")
        tokens = passage.tokens(tokenizer)
        span = tokens[passage.mention.start : passage.mention.end + 1]
        if not any(_is_argument_token(t, gazetteer) for t in span):
            return ClusterType.TYPE2
    return ClusterType.TYPE1


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

_EVENT_TYPES = (
    "earthquake", "bombing", "wildfire", "flood", "tornado", "hurricane",
    "eruption", "derailment", "collision", "shooting", "protest", "strike",
    "election", "referendum", "summit", "festival", "blackout", "heatwave",
    "blizzard", "landslide", "drought", "riot", "ceasefire", "invasion",
    "airlift", "evacuation", "epidemic", "outbreak", "recall", "merger",
    "bankruptcy", "scandal", "verdict", "acquittal", "indictment",
    "inauguration", "coronation", "eclipse", "marathon", "regatta",
    "tournament", "premiere", "auction", "exhibition", "launch", "docking",
    "flyby", "rollout",
)

_LOC_HEADS = (
    "Bal", "Cor", "Dun", "Fen", "Gal", "Hart", "Inver", "Jask", "Kel", "Lor",
    "Mar", "Nor", "Oak", "Pem", "Quil", "Ros", "Strat", "Tarn", "Ulver", "Wex",
    "Ash", "Byrne", "Crag", "Dray", "Elm", "Frost", "Glen", "Holt", "Irv", "Keld",
)
_LOC_MIDS = ("", "a", "en", "i", "o", "u", "er")
_LOC_TAILS = (
    "brook", "bury", "combe", "dale", "field", "ford", "gate", "ham", "hurst",
    "leigh", "mere", "mont", "port", "shire", "stead", "ton", "ville", "wick",
    "worth", "minster",
)

_FILLER_SUBJECTS = (
    "Witnesses", "Officials", "Residents", "Reporters", "Analysts",
    "Neighbors", "Volunteers", "Investigators", "Historians", "Commentators",
)
_FILLER_ADVERBS = (
    "reportedly", "allegedly", "briefly", "suddenly", "quietly", "widely",
    "nearly", "partly", "largely", "barely",
)
_FILLER_OBJECTS = (
    "the scene", "the aftermath", "the chaos", "the damage", "the response",
    "the confusion", "the cleanup", "the crowds", "the silence", "the debris",
)
_EVENT_VERBS = (
    "stunned the region", "drew wide coverage", "disrupted daily life",
    "made national headlines", "prompted an inquiry", "left lasting damage",
    "halted local traffic", "triggered emergency plans",
    "overwhelmed responders", "dominated the news",
)


def _location_pool() -> list[str]:
    names = []
    seen = set()
    for head in _LOC_HEADS:
        for mid in _LOC_MIDS:
            for tail in _LOC_TAILS:
                name = head + mid + tail
                if name not in seen:
                    seen.add(name)
                    names.append(name)
    return names


@dataclass(frozen=True)
class SynthConfig:
    n_clusters: int
    cluster_size_range: tuple[int, int] = (2, 5)
    n_destructors: int = 100
    type2_fraction: float = 0.9
    n_event_types: int = 40
    n_locations: int = 400
    n_years: int = 400
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    destructor_arg_borrow: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.cluster_size_range
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        if lo < 2 or hi < lo:
            raise ConfigError(f"bad cluster_size_range ({lo}, {hi}); need 2 <= lo <= hi")
        if not 0.0 <= self.type2_fraction <= 1.0:
            raise ConfigError("type2_fraction must be in [0, 1]")
        if self.n_destructors < 0:
            raise ConfigError("n_destructors must be >= 0")
        if self.n_event_types < 1:
            raise ConfigError("n_event_types must be >= 1")
        if not 0.0 <= self.destructor_arg_borrow <= 1.0:
            raise ConfigError("destructor_arg_borrow must be in [0, 1]")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9 or any(
            f < 0 for f in self.split_fractions
        ):
            raise ConfigError("split_fractions must be non-negative and sum to 1")
        pool = len(_location_pool())
        if self.n_locations > pool:
            raise ConfigError(f"n_locations exceeds the generator's location space ({pool})")
        if self.n_years > 9000:
            raise ConfigError("n_years exceeds the 4-digit year space (9000)")
        needed = self.n_clusters + (1 if self.n_destructors > 0 else 0)
        if self.n_locations < needed or self.n_years < needed:
            raise ConfigError(
                f"need at least {needed} locations and years "
                f"({self.n_clusters} clusters plus a disjoint destructor pool); "
                f"got {self.n_locations} locations, {self.n_years} years"
            )


def _event_type_pool(n: int) -> list[str]:
    pool = list(_EVENT_TYPES)
    i = 0
    while len(pool) < n:
        pool.append(f"incident{i}")
        i += 1
    return pool[:n]


def _pick(rng: np.random.Generator, pool: Sequence) -> object:
    return pool[int(rng.integers(len(pool)))]


def _filler_sentence(rng: np.random.Generator) -> list[str]:
    subject = _pick(rng, _FILLER_SUBJECTS)
    adverb = _pick(rng, _FILLER_ADVERBS)
    obj = _pick(rng, _FILLER_OBJECTS)
    verb = _pick(rng, ("described", "recounted", "surveyed", "discussed", "recalled"))
    return [subject, adverb, verb, *obj.split(), "."]


def _assemble(
    prefix: list[str], mention: list[str], suffix: list[str]
) -> tuple[list[str], MentionSpan]:
    span = MentionSpan(len(prefix), len(prefix) + len(mention) - 1)
    return prefix + mention + suffix, span


def _type1_passage(
    rng: np.random.Generator, etype: str, loc: str, year: str
) -> tuple[list[str], MentionSpan]:
    mention = [year, loc, etype]
    verb = str(_pick(rng, _EVENT_VERBS)).split()
    choice = int(rng.integers(3))
    if choice == 0:
        tokens, span = _assemble(["The"], mention, [*verb, "."])
    elif choice == 1:
        subject = str(_pick(rng, _FILLER_SUBJECTS))
        tokens, span = _assemble([subject, "recalled", "how", "the"], mention, [*verb, "."])
    else:
        tokens, span = _assemble(
            ["Coverage", "of", "the"], mention, ["continued", "for", "weeks", "."]
        )
    if rng.random() < 0.7:
        tokens = tokens + _filler_sentence(rng)
    return tokens, span


def _type2_passage(
    rng: np.random.Generator, etype: str, loc: str, year: str
) -> tuple[list[str], MentionSpan]:
    mention = [etype]
    choice = int(rng.integers(3))
    if choice == 0:
        tokens, span = _assemble(
            ["Officials", "in", loc, "said", "the"],
            mention,
            ["of", year, *str(_pick(rng, _EVENT_VERBS)).split(), "."],
        )
    elif choice == 1:
        tokens, span = _assemble(
            ["In", year, ",", "residents", "of", loc, "endured", "a", "severe"],
            mention,
            ["."],
        )
    else:
        tokens, span = _assemble(
            ["The"],
            mention,
            ["that", "struck", loc, "in", year, "remains", "notorious", "."],
        )
    if rng.random() < 0.7:
        tokens = tokens + _filler_sentence(rng)
    return tokens, span


def _destructor_passage(
    rng: np.random.Generator, etype: str, loc: str, year: str
) -> list[str]:
    choice = int(rng.integers(3))
    if choice == 0:
        tokens = ["A", "panel", "reviewed", etype, "preparedness", "for", loc,
                  "during", year, "."]
    elif choice == 1:
        tokens = ["The", loc, "council", "budgeted", "for", etype, "drills",
                  "in", year, "."]
    else:
        tokens = ["An", "archive", "from", year, "catalogued", etype,
                  "records", "near", loc, "."]
    if rng.random() < 0.5:
        tokens = tokens + _filler_sentence(rng)
    return tokens


def _borrow_destructor_args(
    cfg: SynthConfig,
    split_passages: dict[str, list[Passage]],
    split_clusters: dict[str, list[int]],
    cluster_etype: dict[int, str],
    locations: list[str],
    years: list[str],
    etypes: list[str],
) -> None:
    """Rewrite a fraction of destructors to reuse a same-split cluster's
    location and year (with a different event type), so the noise is lexically
    similar to annotated passages instead of disjoint from them."""
    rng = np.random.default_rng([cfg.seed, 7])
    for name in SPLIT_NAMES:
        members = split_clusters[name]
        passages = split_passages[name]
        if not members:
            continue
        for i, passage in enumerate(passages):
            if not passage.is_destructor:
                continue
            if rng.random() >= cfg.destructor_arg_borrow:
                continue
            ci = int(_pick(rng, members))
            while True:
                etype = str(_pick(rng, etypes))
                if etype != cluster_etype[ci]:
                    break
            tokens = _destructor_passage(rng, etype, locations[ci], years[ci])
            passages[i] = Passage(
                id=passage.id, text=" ".join(tokens), is_destructor=True
            )


def generate_synthetic_corpus(cfg: SynthConfig) -> dict[str, CorpusSplit]:
    """Deterministic synthetic train/dev/test splits (byte-identical per seed).

    Cluster arguments (location, year) are sampled without replacement, so an
    argument token appears in exactly one cluster; destructor arguments come
    from the leftover pools and never collide with any cluster's.
    """
    rng = np.random.default_rng(cfg.seed)
    etypes = _event_type_pool(cfg.n_event_types)
    locations = [_location_pool()[i] for i in rng.permutation(len(_location_pool()))][
        : cfg.n_locations
    ]
    years = [str(1000 + i) for i in rng.choice(9000, size=cfg.n_years, replace=False)]

    n = cfg.n_clusters
    n_type2 = round(cfg.type2_fraction * n)
    type2_flags = np.zeros(n, dtype=bool)
    type2_flags[rng.permutation(n)[:n_type2]] = True

    lo, hi = cfg.cluster_size_range
    annotated: dict[int, list[Passage]] = {}
    cluster_etype: dict[int, str] = {}
    for ci in range(n):
        etype = str(_pick(rng, etypes))
        cluster_etype[ci] = etype
        loc, year = locations[ci], years[ci]
        size = int(rng.integers(lo, hi + 1))
        members = []
        for mi in range(size):
            realize = _type2_passage if type2_flags[ci] else _type1_passage
            tokens, span = realize(rng, etype, loc, year)
            members.append(
                Passage(
                    id=f"p{ci:05d}-{mi:02d}",
                    text=" ".join(tokens),
                    mention=span,
                    cluster_id=f"evt-{ci:05d}",
                )
            )
        annotated[ci] = members

    spare_locations = locations[n:]
    spare_years = years[n:]
    destructors = []
    for di in range(cfg.n_destructors):
        tokens = _destructor_passage(
            rng,
            str(_pick(rng, etypes)),
            str(_pick(rng, spare_locations)),
            str(_pick(rng, spare_years)),
        )
        destructors.append(
            Passage(id=f"dx{di:06d}", text=" ".join(tokens), is_destructor=True)
        )

    cluster_counts = _largest_remainder(n, cfg.split_fractions)
    destructor_counts = _largest_remainder(cfg.n_destructors, cfg.split_fractions)
    cluster_order = list(rng.permutation(n))
    destructor_order = list(rng.permutation(cfg.n_destructors))

    split_passages: dict[str, list[Passage]] = {}
    split_clusters: dict[str, list[int]] = {}
    c_lo = d_lo = 0
    for name, c_n, d_n in zip(SPLIT_NAMES, cluster_counts, destructor_counts):
        passages: list[Passage] = []
        for ci in sorted(cluster_order[c_lo : c_lo + c_n]):
            passages.extend(annotated[ci])
        for di in sorted(destructor_order[d_lo : d_lo + d_n]):
            passages.append(destructors[di])
        split_clusters[name] = sorted(cluster_order[c_lo : c_lo + c_n])
        split_passages[name] = passages
        c_lo += c_n
        d_lo += d_n
    if cfg.destructor_arg_borrow > 0.0:
        _borrow_destructor_args(cfg, split_passages, split_clusters,
                                cluster_etype, locations, years, etypes)
    return {name: CorpusSplit(name, ps) for name, ps in split_passages.items()}
