"""Bi-encoder retrieval: dot-product scoring, an exact flat index, and
contrastive training with mined hard negatives plus in-batch negatives.

The query-side and passage-side encoders are distinct parameter sets inside
one store (prefixes ``eq.`` / ``ep.``). Training iterates every ordered
co-cluster pair (|C| * (|C| - 1) per cluster), attaches one BM25-mined hard
negative to each pair, and treats the other examples' passages in a batch as
additional negatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bm25 import (
    DEFAULT_STOPWORDS,
    InvertedIndex,
    QueryBuilderKind,
    bm25_top_k,
    build_bm25_index,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import CorpusSplit, Passage
from .encoder import (
    Encoder,
    EncoderConfig,
    EncoderMode,
    PASSAGE_TOKEN_BUDGET,
    QUERY_TOKEN_BUDGET,
    encode_query,
    passage_tokens,
    query_tokens,
)
from .errors import TrainingError, ValidationError
from .metrics import mrr_at_k
from .nn import OptimizerState, ParamStore, adamw_step, nll_from_logits
from .textproc import MarkStyle, Tokenizer, Vocabulary


def sim(q_cls: np.ndarray, p_cls: np.ndarray) -> float:
    """Dot-product similarity between pooled CLS vectors."""
    q_cls = np.asarray(q_cls, dtype=np.float64)
    p_cls = np.asarray(p_cls, dtype=np.float64)
    if q_cls.shape != p_cls.shape:
        raise ValidationError(f"dim mismatch: {q_cls.shape} vs {p_cls.shape}")
    return float(q_cls @ p_cls)


@dataclass
class DenseIndex:
    matrix: np.ndarray  # (n, d), row i = CLS vector of ids[i]
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise ValidationError(
                f"index matrix {self.matrix.shape} does not match {len(self.ids)} ids"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise ValidationError("index contains non-finite vectors")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_index(
    passages: list[Passage] | CorpusSplit,
    encoder: Encoder,
    tokenizer: Tokenizer,
    budget: int = PASSAGE_TOKEN_BUDGET,
) -> DenseIndex:
    if isinstance(passages, CorpusSplit):
        passages = list(passages.passages.values())
    rows = [encoder.encode(passage_tokens(p, tokenizer, budget)).cls_rep for p in passages]
    matrix = np.stack(rows) if rows else np.zeros((0, encoder.cfg.dim))
    return DenseIndex(matrix=matrix, ids=tuple(p.id for p in passages))


def save_index(index: DenseIndex, path) -> None:
    save_checkpoint(path, {"matrix": index.matrix}, ids=index.ids)


def load_index(path) -> DenseIndex:
    tensors, ids = load_checkpoint(path)
    return DenseIndex(matrix=tensors["matrix"], ids=tuple(ids))


def top_k(index: DenseIndex, q_cls: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exactly the k highest-sim passages, descending; ties by ascending id.

    k beyond the corpus size returns the full ranking.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if q_cls.shape != (index.dim,):
        raise ValidationError(f"query dim {q_cls.shape} does not match index dim {index.dim}")
    scores = index.matrix @ q_cls
    ids = np.array(index.ids)
    order = np.lexsort((ids, -scores))[: min(k, len(index))]
    return [(str(ids[i]), float(scores[i])) for i in order]


# ---------------------------------------------------------------------------
# Contrastive training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainExample:
    query: Passage
    positive: Passage
    hard_negative: Passage

    def __post_init__(self) -> None:
        if self.query.cluster_id is None or self.query.cluster_id != self.positive.cluster_id:
            raise ValidationError(
                f"positive {self.positive.id!r} is not co-clustered with query {self.query.id!r}"
            )
        if self.hard_negative.cluster_id == self.query.cluster_id:
            raise ValidationError(
                f"hard negative {self.hard_negative.id!r} is in the query's cluster"
            )


def contrastive_loss(
    batch: list[TrainExample],
    query_encoder: Encoder,
    passage_encoder: Encoder,
    tokenizer: Tokenizer,
    *,
    mark_style: MarkStyle | None = MarkStyle.RETRIEVER_S,
    query_budget: int = QUERY_TOKEN_BUDGET,
    passage_budget: int = PASSAGE_TOKEN_BUDGET,
    include_other_positives: bool = True,
    exclude_same_cluster: bool = False,
    backward: bool = True,
) -> float:
    """Mean over queries of -log softmax(sim)[positive].

    Each query's candidate set is its own positive and hard negative plus,
    as in-batch negatives, the other examples' passages (positives included
    unless include_other_positives is off; exclude_same_cluster additionally
    drops in-batch candidates that share the query's cluster).
    Gradients accumulate into both encoders' stores unless backward is off.
    """
    if not batch:
        raise ValidationError("empty training batch")
    uniq: dict[str, Passage] = {}
    for ex in batch:
        uniq.setdefault(ex.positive.id, ex.positive)
        uniq.setdefault(ex.hard_negative.id, ex.hard_negative)
    p_encs = {
        pid: passage_encoder.encode(passage_tokens(p, tokenizer, passage_budget))
        for pid, p in uniq.items()
    }
    d_cls = {pid: np.zeros(passage_encoder.cfg.dim) for pid in uniq}

    total = 0.0
    scale = 1.0 / len(batch)
    for i, ex in enumerate(batch):
        candidates = [ex.positive.id, ex.hard_negative.id]
        for j, other in enumerate(batch):
            if j == i:
                continue
            candidates.append(other.hard_negative.id)
            if include_other_positives:
                candidates.append(other.positive.id)
        candidates = list(dict.fromkeys(candidates))
        if exclude_same_cluster:
            candidates = [
                pid
                for pid in candidates
                if pid == ex.positive.id or uniq[pid].cluster_id != ex.query.cluster_id
            ]
        q_enc = query_encoder.encode(
            query_tokens(ex.query, tokenizer, mark_style, query_budget)[0]
        )
        cand_matrix = np.stack([p_encs[pid].cls_rep for pid in candidates])
        logits = cand_matrix @ q_enc.cls_rep
        loss, d_logits = nll_from_logits(logits, candidates.index(ex.positive.id))
        total += loss
        if backward:
            d_reps = np.zeros_like(q_enc.reps)
            d_reps[0] = (cand_matrix.T @ d_logits) * scale
            q_enc.backward(d_reps)
            for pid, dl in zip(candidates, d_logits):
                d_cls[pid] += dl * q_enc.cls_rep * scale
    if backward:
        for pid, enc in p_encs.items():
            d_reps = np.zeros_like(enc.reps)
            d_reps[0] = d_cls[pid]
            enc.backward(d_reps)
    return total * scale


def coreference_pairs(split: CorpusSplit) -> list[tuple[str, str]]:
    """All ordered (query, positive) pairs, cluster by cluster: each cluster
    of size n contributes n*(n-1) pairs."""
    pairs: list[tuple[str, str]] = []
    for cid in sorted(split.clusters):
        members = sorted(split.clusters[cid].passage_ids)
        for q in members:
            pairs.extend((q, p) for p in members if p != q)
    return pairs


def mine_hard_negatives(
    query: Passage,
    split: CorpusSplit,
    bm25_index: InvertedIndex,
    tokenizer: Tokenizer,
    kind: QueryBuilderKind = QueryBuilderKind.MENTION_PLUS_SALIENT,
    k_pool: int = 20,
    rng: np.random.Generator | None = None,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> str:
    """Uniform pick from the BM25 top-k_pool, excluding the query itself and
    its cluster members; widens to top-100 before giving up."""
    rng = rng if rng is not None else np.random.default_rng(0)
    excluded = split.positives_for(query.id) | {query.id}
    for pool in (k_pool, max(100, k_pool)):
        ranked = bm25_top_k(query, kind, bm25_index, pool, tokenizer, stopwords)
        eligible = [pid for pid, _ in ranked if pid not in excluded]
        if eligible:
            return eligible[int(rng.integers(len(eligible)))]
    raise TrainingError(
        f"no eligible hard negative for query {query.id!r} within the top-100 BM25 pool"
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RetrieverConfig:
    dim: int = 64
    max_positions: int = 256
    epochs: int = 5
    batch_size: int = 64
    lr: float = 1e-2
    weight_decay: float = 0.01
    warmup_fraction: float = 0.1
    seed: int = 0
    query_budget: int = QUERY_TOKEN_BUDGET
    passage_budget: int = PASSAGE_TOKEN_BUDGET
    mark_queries: bool = True
    hard_negative_pool: int = 20
    hard_negative_kind: QueryBuilderKind = QueryBuilderKind.MENTION_PLUS_SALIENT
    include_other_positives: bool = True
    exclude_same_cluster: bool = False
    eval_k: int = 10

    @property
    def mark_style(self) -> MarkStyle | None:
        return MarkStyle.RETRIEVER_S if self.mark_queries else None


@dataclass
class RetrieverTrainResult:
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    epoch_losses: list[float] = field(default_factory=list)
    dev_mrr: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based


def _bi_encoders(
    cfg: RetrieverConfig, vocab: Vocabulary, store: ParamStore
) -> tuple[Encoder, Encoder]:
    q = Encoder(
        EncoderConfig(cfg.dim, cfg.max_positions, EncoderMode.BI_QUERY, cfg.seed), vocab, store
    )
    p = Encoder(
        EncoderConfig(cfg.dim, cfg.max_positions, EncoderMode.BI_PASSAGE, cfg.seed), vocab, store
    )
    return q, p


def encoders_from_params(
    params: dict[str, np.ndarray], vocab: Vocabulary, dim: int, max_positions: int = 256
) -> tuple[Encoder, Encoder]:
    """Frozen query/passage encoders over a loaded parameter snapshot."""
    store = ParamStore(0)
    q = Encoder(
        EncoderConfig(dim, max_positions, EncoderMode.BI_QUERY, 0), vocab, store
    )
    p = Encoder(
        EncoderConfig(dim, max_positions, EncoderMode.BI_PASSAGE, 0), vocab, store
    )
    store.load(params)
    return q, p


def dev_mrr_at_k(
    dev_split: CorpusSplit,
    query_encoder: Encoder,
    passage_encoder: Encoder,
    tokenizer: Tokenizer,
    cfg: RetrieverConfig,
) -> float:
    index = build_index(dev_split, passage_encoder, tokenizer, cfg.passage_budget)
    run = run_retrieval(
        dev_split,
        index,
        query_encoder,
        tokenizer,
        style=cfg.mark_style,
        budget=cfg.query_budget,
        k=cfg.eval_k,
    )
    gold = {qid: dev_split.positives_for(qid) for qid in dev_split.queries}
    return mrr_at_k({qid: [pid for pid, _ in ranked] for qid, ranked in run.items()}, gold, cfg.eval_k)


def run_retrieval(
    split: CorpusSplit,
    index: DenseIndex,
    query_encoder: Encoder,
    tokenizer: Tokenizer,
    *,
    style: MarkStyle | None = MarkStyle.RETRIEVER_S,
    budget: int = QUERY_TOKEN_BUDGET,
    k: int = 500,
) -> dict[str, list[tuple[str, float]]]:
    """Rank the collection for every query in the split; a query never
    retrieves its own passage."""
    run: dict[str, list[tuple[str, float]]] = {}
    for qid in sorted(split.queries):
        enc = encode_query(split.passage(qid), query_encoder, tokenizer, style, budget)
        ranked = top_k(index, enc.cls_rep, min(k + 1, len(index)))
        run[qid] = [(pid, s) for pid, s in ranked if pid != qid][:k]
    return run


def train_retriever(
    train_split: CorpusSplit,
    dev_split: CorpusSplit,
    cfg: RetrieverConfig,
    tokenizer: Tokenizer | None = None,
    vocab: Vocabulary | None = None,
) -> RetrieverTrainResult:
    """Contrastive training over all co-cluster pairs with per-epoch dev
    MRR@eval_k tracking; returns the best-epoch parameter snapshot."""
    tokenizer = tokenizer if tokenizer is not None else Tokenizer()
    if vocab is None:
        vocab = Vocabulary.build(
            p.tokens(tokenizer)
            for s in (train_split, dev_split)
            for p in s.passages.values()
        )
    store = ParamStore(cfg.seed)
    query_encoder, passage_encoder = _bi_encoders(cfg, vocab, store)

    bm25_index = build_bm25_index(train_split, tokenizer)
    rng = np.random.default_rng(cfg.seed)
    examples = []
    for qid, pid in coreference_pairs(train_split):
        neg_id = mine_hard_negatives(
            train_split.passage(qid),
            train_split,
            bm25_index,
            tokenizer,
            cfg.hard_negative_kind,
            cfg.hard_negative_pool,
            rng,
        )
        examples.append(
            TrainExample(
                query=train_split.passage(qid),
                positive=train_split.passage(pid),
                hard_negative=train_split.passage(neg_id),
            )
        )
    if not examples:
        raise TrainingError("no training pairs: every cluster is below size 2")

    steps_per_epoch = math.ceil(len(examples) / cfg.batch_size)
    opt = OptimizerState(
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        warmup_fraction=cfg.warmup_fraction,
        total_steps=cfg.epochs * steps_per_epoch,
    )
    result = RetrieverTrainResult(params={}, vocab=vocab)
    best_mrr = -1.0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(examples), cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            store.zero_grads()
            loss = contrastive_loss(
                batch,
                query_encoder,
                passage_encoder,
                tokenizer,
                mark_style=cfg.mark_style,
                query_budget=cfg.query_budget,
                passage_budget=cfg.passage_budget,
                include_other_positives=cfg.include_other_positives,
                exclude_same_cluster=cfg.exclude_same_cluster,
            )
            adamw_step(store, opt)
            epoch_loss += loss * len(batch)
        result.epoch_losses.append(epoch_loss / len(examples))
        mrr = dev_mrr_at_k(dev_split, query_encoder, passage_encoder, tokenizer, cfg)
        result.dev_mrr.append(mrr)
        if mrr > best_mrr:
            best_mrr = mrr
            result.params = store.snapshot()
            result.best_epoch = epoch
    return result
