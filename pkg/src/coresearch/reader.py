"""Cross-encoder re-ranking and span extraction.

Each (query, passage) pair is encoded as [CLS] + marked-query + [SEP] +
passage-window, with long passages split into stride-overlapping windows.
Heads on top of the shared encoding:

* start/end distributions over the window's passage tokens (span extraction),
* a CLS-based passage-selection score (baseline variant),
* a coreference pair score s(m_j, m_i) = s_m(m_j) + s_a(m_j, m_i) built from
  mention-boundary representations g = [first-token rep, last-token rep]
  (integrated variant), with optional lambda-weighted and bidirectional
  antecedent forms.

Predicted spans are always valid by construction: start <= end and length
bounded by max_span_len. All backward passes are hand-derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import CorpusSplit, MentionSpan, Passage
from .encoder import Encoder, EncoderConfig, EncoderMode, Encoding, query_tokens
from .errors import TrainingError, ValidationError
from .metrics import RankedResult, map_at_k
from .nn import (
    OptimizerState,
    ParamStore,
    adamw_step,
    dropout_mask,
    nll_from_logits,
    softmax,
)
from .textproc import SEP, MarkStyle, Tokenizer, Vocabulary


class ReaderVariant(Enum):
    DPR_BASELINE = "baseline"
    INTEGRATED = "integrated"


@dataclass(frozen=True)
class ReaderConfig:
    variant: ReaderVariant = ReaderVariant.INTEGRATED
    dim: int = 64
    max_seq: int = 256
    query_budget: int = 64
    stride: int = 128
    max_span_len: int = 10
    hidden: int = 128
    m_negatives: int = 24
    lam: float | None = None
    bidirectional_antecedent: bool = False
    batch_size: int = 24
    seed: int = 0

    def __post_init__(self) -> None:
        if self.stride >= self.max_seq:
            raise ValidationError("stride must be smaller than max_seq")
        if self.stride < 1 or self.max_span_len < 1:
            raise ValidationError("stride and max_span_len must be >= 1")
        if self.lam is not None and not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must be in [0, 1], got {self.lam}")


class GoldSpanNotCovered(TrainingError):
    """The positive's gold span fell outside every stride window."""


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    passage_offset: int
    query_len: int
    tokens: tuple[str, ...]  # query + [SEP] + passage slice; encoder adds CLS
    n_passage: int

    def passage_positions(self) -> range:
        """Encoding row indices of this window's passage tokens."""
        first = self.query_len + 2  # CLS + query + SEP
        return range(first, first + self.n_passage)

    def encoding_pos(self, local_idx: int) -> int:
        return self.query_len + 2 + local_idx

    def covers(self, span: MentionSpan) -> bool:
        return (
            self.passage_offset <= span.start
            and span.end < self.passage_offset + self.n_passage
        )


def segment(
    query_toks: list[str] | tuple[str, ...],
    passage_toks: list[str] | tuple[str, ...],
    cfg: ReaderConfig,
) -> list[Window]:
    """Stride-overlapping cross-encoder inputs covering every passage token.

    Window capacity is max_seq minus CLS, SEP, and the query; offsets advance
    by the stride until they pass the passage end.
    """
    qlen = len(query_toks)
    if qlen > cfg.query_budget:
        raise ValidationError(f"query of {qlen} tokens exceeds budget {cfg.query_budget}")
    size = cfg.max_seq - 2 - qlen
    if size < 1:
        raise ValidationError("query leaves no room for passage tokens")
    n = len(passage_toks)
    offsets = [0] if n == 0 else range(0, n, cfg.stride)
    head = tuple(query_toks) + (SEP,)
    return [
        Window(
            passage_offset=off,
            query_len=qlen,
            tokens=head + tuple(passage_toks[off : off + size]),
            n_passage=len(passage_toks[off : off + size]),
        )
        for off in offsets
    ]


# ---------------------------------------------------------------------------
# Span heads
# ---------------------------------------------------------------------------


def span_distributions(
    encoding: Encoding, window: Window, store: ParamStore
) -> tuple[np.ndarray, np.ndarray]:
    """Start/end probability distributions over the window's passage tokens."""
    positions = list(window.passage_positions())
    if not positions:
        raise ValidationError("window contains zero passage tokens")
    reps = encoding.reps[positions]
    return softmax(reps @ store["rd.w_start"]), softmax(reps @ store["rd.w_end"])


def best_span(
    p_start: np.ndarray, p_end: np.ndarray, max_span_len: int
) -> tuple[MentionSpan, float]:
    """Argmax of P_start(s) * P_end(t) over s <= t, t - s + 1 <= max_span_len.

    Ties resolve to the earlier start, then the earlier end; equals
    brute-force enumeration by construction.
    """
    n = len(p_start)
    if n == 0 or len(p_end) != n:
        raise ValidationError("degenerate span distributions")
    best_score = -1.0
    best_s = best_t = 0
    for s in range(n):
        ps = p_start[s]
        for t in range(s, min(n, s + max_span_len)):
            score = ps * p_end[t]
            if score > best_score:
                best_score, best_s, best_t = score, s, t
    return MentionSpan(best_s, best_t), float(best_score)


# ---------------------------------------------------------------------------
# Selection heads
# ---------------------------------------------------------------------------


def select_dpr(cls_reps: np.ndarray, store: ParamStore) -> np.ndarray:
    """Softmax over per-passage CLS . w_select."""
    cls_reps = np.atleast_2d(cls_reps)
    if cls_reps.shape[0] < 1:
        raise ValidationError("selection needs at least one passage")
    return softmax(cls_reps @ store["rd.w_select"])


def _mention_score(
    store: ParamStore,
    g: np.ndarray,
    rate: float,
    rng: np.random.Generator | None,
) -> tuple[float, tuple]:
    w_hidden, bias, w_out = store["rd.W_m"], store["rd.b_m"], store["rd.w_m"]
    h = np.tanh(w_hidden @ g + bias)
    mask = dropout_mask(h.shape, rate, rng) if rng is not None and rate > 0 else None
    hd = h * mask if mask is not None else h
    return float(w_out @ hd), (g, h, mask)


def _mention_score_backward(store: ParamStore, d_score: float, cache: tuple) -> np.ndarray:
    g, h, mask = cache
    hd = h * mask if mask is not None else h
    store.grad("rd.w_m")[...] += d_score * hd
    dh = d_score * store["rd.w_m"]
    if mask is not None:
        dh = dh * mask
    d_pre = dh * (1.0 - h * h)
    store.grad("rd.W_m")[...] += np.outer(d_pre, g)
    store.grad("rd.b_m")[...] += d_pre
    return store["rd.W_m"].T @ d_pre


def _antecedent_score(
    store: ParamStore,
    g_i: np.ndarray,
    g_j: np.ndarray,
    rate: float,
    rng: np.random.Generator | None,
) -> tuple[float, tuple]:
    u = np.concatenate([g_i, g_j, g_i * g_j])
    w_hidden, bias, w_out = store["rd.W_a"], store["rd.b_a"], store["rd.w_a"]
    h = np.tanh(w_hidden @ u + bias)
    mask = dropout_mask(h.shape, rate, rng) if rng is not None and rate > 0 else None
    hd = h * mask if mask is not None else h
    return float(w_out @ hd), (g_i, g_j, u, h, mask)


def _antecedent_score_backward(
    store: ParamStore, d_score: float, cache: tuple
) -> tuple[np.ndarray, np.ndarray]:
    g_i, g_j, u, h, mask = cache
    hd = h * mask if mask is not None else h
    store.grad("rd.w_a")[...] += d_score * hd
    dh = d_score * store["rd.w_a"]
    if mask is not None:
        dh = dh * mask
    d_pre = dh * (1.0 - h * h)
    store.grad("rd.W_a")[...] += np.outer(d_pre, u)
    store.grad("rd.b_a")[...] += d_pre
    du = store["rd.W_a"].T @ d_pre
    two_d = len(g_i)
    d_gi = du[:two_d] + du[2 * two_d :] * g_j
    d_gj = du[two_d : 2 * two_d] + du[2 * two_d :] * g_i
    return d_gi, d_gj


def pair_score(
    store: ParamStore,
    cfg: ReaderConfig,
    g_query: np.ndarray,
    g_passage: np.ndarray,
    rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[float, tuple]:
    """Coreference pair score s(m_passage, m_query); returns (score, trace).

    Default form: s_m(g_passage) + s_a([g_query, g_passage, product]).
    With cfg.lam: lam * (s_m(g_query) + s_m(g_passage)) + (1 - lam) * s_a.
    With cfg.bidirectional_antecedent, s_a averages both argument orders.
    """
    expect = 2 * cfg.dim
    if g_query.shape != (expect,) or g_passage.shape != (expect,):
        raise ValidationError(
            f"mention reps must have dim {expect}, got {g_query.shape} and {g_passage.shape}"
        )
    if cfg.bidirectional_antecedent:
        sa1, ca1 = _antecedent_score(store, g_query, g_passage, rate, rng)
        sa2, ca2 = _antecedent_score(store, g_passage, g_query, rate, rng)
        s_a = 0.5 * (sa1 + sa2)
    else:
        s_a, ca1 = _antecedent_score(store, g_query, g_passage, rate, rng)
        ca2 = None
    if cfg.lam is not None:
        smq, cq = _mention_score(store, g_query, rate, rng)
        smp, cp = _mention_score(store, g_passage, rate, rng)
        score = cfg.lam * (smq + smp) + (1.0 - cfg.lam) * s_a
    else:
        smp, cp = _mention_score(store, g_passage, rate, rng)
        cq = None
        score = smp + s_a
    return score, (ca1, ca2, cq, cp)


def pair_score_backward(
    store: ParamStore, cfg: ReaderConfig, d_score: float, trace: tuple
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (d_g_query, d_g_passage)."""
    ca1, ca2, cq, cp = trace
    d = 2 * cfg.dim
    d_gq = np.zeros(d)
    d_gp = np.zeros(d)
    d_sa = d_score * (1.0 - cfg.lam if cfg.lam is not None else 1.0)
    d_sm = d_score * (cfg.lam if cfg.lam is not None else 1.0)
    if ca2 is not None:
        dq1, dp1 = _antecedent_score_backward(store, 0.5 * d_sa, ca1)
        dp2, dq2 = _antecedent_score_backward(store, 0.5 * d_sa, ca2)
        d_gq += dq1 + dq2
        d_gp += dp1 + dp2
    else:
        dq1, dp1 = _antecedent_score_backward(store, d_sa, ca1)
        d_gq += dq1
        d_gp += dp1
    d_gp += _mention_score_backward(store, d_sm, cp)
    if cq is not None:
        d_gq += _mention_score_backward(store, d_sm, cq)
    return d_gq, d_gp


def coref_pair_score(
    g_query: np.ndarray, g_passage: np.ndarray, store: ParamStore, cfg: ReaderConfig
) -> float:
    """Eval-mode pair score."""
    score, _ = pair_score(store, cfg, g_query, g_passage)
    return score


def select_integrated(
    g_query: np.ndarray,
    g_passages: list[np.ndarray],
    store: ParamStore,
    cfg: ReaderConfig,
) -> np.ndarray:
    """Softmax over pair scores of one query mention rep vs k passage reps."""
    if not g_passages:
        raise ValidationError("selection needs at least one passage")
    scores = np.array([coref_pair_score(g_query, g, store, cfg) for g in g_passages])
    return softmax(scores)


def mention_rep(encoding: Encoding, window: Window, local_span: MentionSpan) -> np.ndarray:
    """g = [first-token rep, last-token rep] of a window-local span."""
    return np.concatenate(
        [
            encoding.reps[window.encoding_pos(local_span.start)],
            encoding.reps[window.encoding_pos(local_span.end)],
        ]
    )


def query_mention_rep(encoding: Encoding, q_span: MentionSpan) -> np.ndarray:
    """g for the query mention (positions shift by 1 for the CLS row)."""
    return np.concatenate([encoding.reps[1 + q_span.start], encoding.reps[1 + q_span.end]])


# ---------------------------------------------------------------------------
# Model bundle and inference
# ---------------------------------------------------------------------------


class ReaderModel:
    def __init__(self, cfg: ReaderConfig, vocab: Vocabulary, store: ParamStore | None = None):
        self.cfg = cfg
        self.vocab = vocab
        self.store = store if store is not None else ParamStore(cfg.seed)
        enc_cfg = EncoderConfig(cfg.dim, cfg.max_seq, EncoderMode.CROSS, cfg.seed)
        self.encoder = Encoder(enc_cfg, vocab, self.store)
        d, h = cfg.dim, cfg.hidden
        if "rd.w_start" not in self.store:
            self.store.add("rd.w_start", (d,))
            self.store.add("rd.w_end", (d,))
            self.store.add("rd.w_select", (d,))
            self.store.add("rd.W_m", (h, 2 * d))
            self.store.add("rd.b_m", (h,), zero=True)
            self.store.add("rd.w_m", (h,))
            self.store.add("rd.W_a", (h, 6 * d))
            self.store.add("rd.b_a", (h,), zero=True)
            self.store.add("rd.w_a", (h,))

    @classmethod
    def from_params(
        cls, params: dict[str, np.ndarray], cfg: ReaderConfig, vocab: Vocabulary
    ) -> "ReaderModel":
        model = cls(cfg, vocab)
        model.store.load(params)
        return model

    def snapshot(self) -> dict[str, np.ndarray]:
        return self.store.snapshot()


@dataclass
class PassageInference:
    passage_id: str
    span: MentionSpan  # passage-local token indices
    span_score: float
    window: Window
    encoding: Encoding
    local_span: MentionSpan


def infer_passage(
    model: ReaderModel,
    q_toks: list[str] | tuple[str, ...],
    passage: Passage,
    tokenizer: Tokenizer,
) -> PassageInference:
    """Best valid span for one passage: per window, then max span score
    across windows (ties to the earlier window)."""
    cfg = model.cfg
    p_toks = passage.tokens(tokenizer)
    best: tuple[float, Window, Encoding, MentionSpan] | None = None
    for window in segment(q_toks, p_toks, cfg):
        if window.n_passage == 0:
            continue
        enc = model.encoder.encode(list(window.tokens))
        p_start, p_end = span_distributions(enc, window, model.store)
        local, score = best_span(p_start, p_end, cfg.max_span_len)
        if best is None or score > best[0]:
            best = (score, window, enc, local)
    if best is None:
        raise ValidationError(f"passage {passage.id!r} has no tokens to read")
    score, window, enc, local = best
    span = MentionSpan(window.passage_offset + local.start, window.passage_offset + local.end)
    return PassageInference(passage.id, span, score, window, enc, local)


def rerank(
    query: Passage,
    retrieved: list[tuple[str, float]],
    model: ReaderModel,
    split: CorpusSplit,
    tokenizer: Tokenizer,
) -> list[RankedResult]:
    """Re-order retrieved passages by selection probability (descending),
    ties by retriever score (descending) then passage id."""
    if not retrieved:
        return []
    cfg = model.cfg
    q_toks, q_span = query_tokens(query, tokenizer, MarkStyle.READER_QSPAN, cfg.query_budget)
    inferences = [
        infer_passage(model, q_toks, split.passage(pid), tokenizer) for pid, _ in retrieved
    ]
    if cfg.variant is ReaderVariant.DPR_BASELINE:
        probs = select_dpr(np.stack([inf.encoding.cls_rep for inf in inferences]), model.store)
    else:
        scores = []
        for inf in inferences:
            g_q = query_mention_rep(inf.encoding, q_span)
            g_p = mention_rep(inf.encoding, inf.window, inf.local_span)
            scores.append(coref_pair_score(g_q, g_p, model.store, cfg))
        probs = softmax(np.array(scores))
    retriever_score = {pid: s for pid, s in retrieved}
    order = sorted(
        range(len(inferences)),
        key=lambda i: (
            -probs[i],
            -retriever_score[inferences[i].passage_id],
            inferences[i].passage_id,
        ),
    )
    results = []
    for i in order:
        inf = inferences[i]
        tokens = split.passage(inf.passage_id).tokens(tokenizer)
        results.append(
            RankedResult(
                passage_id=inf.passage_id,
                span=inf.span,
                score=retriever_score[inf.passage_id],
                select_prob=float(probs[i]),
                span_text=" ".join(tokens[inf.span.start : inf.span.end + 1]),
            )
        )
    return results


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReaderExample:
    query: Passage
    positive: Passage
    negatives: tuple[Passage, ...]


def reader_loss(
    example: ReaderExample,
    model: ReaderModel,
    tokenizer: Tokenizer,
    *,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    backward: bool = True,
) -> tuple[float, dict[str, float]]:
    """-log P_select(positive) - log P_start(gold s) - log P_end(gold t).

    A gold span covered by several windows is marginalized by summing its
    probability across windows before the log. The positive's selection
    representation comes from the first gold-covering window (gold-span
    mention rep); negatives use their predicted best span (argmax detached).
    Gradients accumulate into the model's store unless backward is off.
    """
    cfg, store = model.cfg, model.store
    q_toks, q_span = query_tokens(
        example.query, tokenizer, MarkStyle.READER_QSPAN, cfg.query_budget
    )

    gold = example.positive.mention
    if gold is None:
        raise ValidationError(f"positive passage {example.positive.id!r} has no gold span")
    pos_tokens = example.positive.tokens(tokenizer)
    gold_windows = [w for w in segment(q_toks, pos_tokens, cfg) if w.covers(gold)]
    if not gold_windows:
        raise GoldSpanNotCovered(
            f"gold span ({gold.start}, {gold.end}) of passage "
            f"{example.positive.id!r} is outside every window"
        )
    gw_data = []
    p_start_marginal = 0.0
    p_end_marginal = 0.0
    for window in gold_windows:
        enc = model.encoder.encode(list(window.tokens))
        p_start, p_end = span_distributions(enc, window, store)
        ls = gold.start - window.passage_offset
        le = gold.end - window.passage_offset
        p_start_marginal += p_start[ls]
        p_end_marginal += p_end[le]
        gw_data.append((window, enc, p_start, p_end, ls, le))
    loss_start = -math.log(p_start_marginal)
    loss_end = -math.log(p_end_marginal)

    # Selection entries: positive first (gold span in its first gold window),
    # then each negative at its predicted best span.
    window0, enc0, _, _, ls0, le0 = gw_data[0]
    entries: list[tuple[Encoding, Window, MentionSpan]] = [
        (enc0, window0, MentionSpan(ls0, le0))
    ]
    for negative in example.negatives:
        inf = infer_passage(model, q_toks, negative, tokenizer)
        entries.append((inf.encoding, inf.window, inf.local_span))

    traces = None
    if cfg.variant is ReaderVariant.DPR_BASELINE:
        cls_matrix = np.stack([enc.reps[0] for enc, _, _ in entries])
        logits = cls_matrix @ store["rd.w_select"]
    else:
        scores, traces = [], []
        for enc, window, local in entries:
            g_q = query_mention_rep(enc, q_span)
            g_p = mention_rep(enc, window, local)
            s, trace = pair_score(store, cfg, g_q, g_p, dropout_rate, rng)
            scores.append(s)
            traces.append((trace, g_q, g_p))
        logits = np.array(scores)
    loss_select, d_logits = nll_from_logits(logits, 0)
    total = loss_select + loss_start + loss_end
    parts = {"select": loss_select, "start": loss_start, "end": loss_end}
    if not backward:
        return total, parts

    d_reps: dict[int, np.ndarray] = {}
    encodings: dict[int, Encoding] = {}

    def grad_buffer(enc: Encoding) -> np.ndarray:
        key = id(enc)
        if key not in d_reps:
            d_reps[key] = np.zeros_like(enc.reps)
            encodings[key] = enc
        return d_reps[key]

    # Start/end terms through each gold window's softmax:
    # d z_k = p_k * u * ([k == gold] - p_gold) with u = -1 / marginal.
    for window, enc, p_start, p_end, ls, le in gw_data:
        positions = list(window.passage_positions())
        reps = enc.reps[positions]
        buf = grad_buffer(enc)
        for dist, gold_local, marginal, name in (
            (p_start, ls, p_start_marginal, "rd.w_start"),
            (p_end, le, p_end_marginal, "rd.w_end"),
        ):
            u = -1.0 / marginal
            d_z = dist * u * (-dist[gold_local])
            d_z[gold_local] += dist[gold_local] * u
            store.grad(name)[...] += reps.T @ d_z
            buf[positions] += np.outer(d_z, store[name])

    # Selection term.
    if cfg.variant is ReaderVariant.DPR_BASELINE:
        store.grad("rd.w_select")[...] += cls_matrix.T @ d_logits
        for (enc, _, _), dl in zip(entries, d_logits):
            grad_buffer(enc)[0] += dl * store["rd.w_select"]
    else:
        d = cfg.dim
        for (trace, g_q, g_p), (enc, window, local), dl in zip(traces, entries, d_logits):
            d_gq, d_gp = pair_score_backward(store, cfg, float(dl), trace)
            buf = grad_buffer(enc)
            buf[1 + q_span.start] += d_gq[:d]
            buf[1 + q_span.end] += d_gq[d:]
            buf[window.encoding_pos(local.start)] += d_gp[:d]
            buf[window.encoding_pos(local.end)] += d_gp[d:]

    for key, enc in encodings.items():
        enc.backward(d_reps[key])
    return total, parts


@dataclass
class ReaderTrainResult:
    params: dict[str, np.ndarray]
    epoch_losses: list[float] = field(default_factory=list)
    dev_map10: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    skipped: int = 0
    discarded_queries: int = 0


def build_reader_examples(
    split: CorpusSplit,
    run: dict[str, list[tuple[str, float]]],
    cfg: ReaderConfig,
) -> tuple[list[ReaderExample], int]:
    """One positive (top-ranked retrieved positive) plus up to m_negatives
    top-ranked non-positives per query; queries with no retrievable positive
    or no negatives are discarded."""
    examples: list[ReaderExample] = []
    discarded = 0
    for qid in sorted(run):
        gold = split.positives_for(qid)
        ranked_ids = [pid for pid, _ in run[qid]]
        positive = next((pid for pid in ranked_ids if pid in gold), None)
        negatives = [pid for pid in ranked_ids if pid not in gold][: cfg.m_negatives]
        if positive is None or not negatives:
            discarded += 1
            continue
        examples.append(
            ReaderExample(
                query=split.passage(qid),
                positive=split.passage(positive),
                negatives=tuple(split.passage(n) for n in negatives),
            )
        )
    return examples, discarded


def evaluate_reader(
    dev_split: CorpusSplit,
    dev_run: dict[str, list[tuple[str, float]]],
    model: ReaderModel,
    tokenizer: Tokenizer,
    depth: int = 50,
) -> float:
    """mAP@10 of the reranked dev run."""
    id_run = {}
    for qid in sorted(dev_run):
        results = rerank(
            dev_split.passage(qid), dev_run[qid][:depth], model, dev_split, tokenizer
        )
        id_run[qid] = [r.passage_id for r in results]
    gold = {qid: dev_split.positives_for(qid) for qid in dev_run}
    return map_at_k(id_run, gold, 10)


def train_reader(
    train_split: CorpusSplit,
    dev_split: CorpusSplit,
    train_run: dict[str, list[tuple[str, float]]],
    dev_run: dict[str, list[tuple[str, float]]],
    vocab: Vocabulary,
    cfg: ReaderConfig,
    *,
    tokenizer: Tokenizer | None = None,
    epochs: int = 5,
    lr: float = 1e-2,
    weight_decay: float = 0.01,
    warmup_fraction: float = 0.1,
    dropout_rate: float = 0.1,
    rerank_depth: int = 50,
) -> ReaderTrainResult:
    """Train a reader on retrieved candidates; keeps per-epoch dev mAP@10 and
    returns the best-epoch snapshot."""
    tokenizer = tokenizer if tokenizer is not None else Tokenizer()
    model = ReaderModel(cfg, vocab)
    examples, discarded = build_reader_examples(train_split, train_run, cfg)
    if not examples:
        raise TrainingError("no trainable queries: no retrievable positives in the run")
    rng = np.random.default_rng(cfg.seed)
    steps_per_epoch = math.ceil(len(examples) / cfg.batch_size)
    opt = OptimizerState(
        lr=lr,
        weight_decay=weight_decay,
        warmup_fraction=warmup_fraction,
        total_steps=epochs * steps_per_epoch,
        dropout_rate=dropout_rate,
    )
    result = ReaderTrainResult(params={}, discarded_queries=discarded)
    best_map = -1.0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(examples))
        epoch_total, epoch_count = 0.0, 0
        for start in range(0, len(examples), cfg.batch_size):
            model.store.zero_grads()
            n_ok = 0
            for i in order[start : start + cfg.batch_size]:
                try:
                    loss, _ = reader_loss(
                        examples[i],
                        model,
                        tokenizer,
                        dropout_rate=dropout_rate,
                        rng=rng,
                    )
                except GoldSpanNotCovered:
                    result.skipped += 1
                    continue
                epoch_total += loss
                n_ok += 1
            if n_ok == 0:
                continue
            model.store.scale_grads(1.0 / n_ok)
            adamw_step(model.store, opt)
            epoch_count += n_ok
        result.epoch_losses.append(epoch_total / max(1, epoch_count))
        dev_map = evaluate_reader(dev_split, dev_run, model, tokenizer, rerank_depth)
        result.dev_map10.append(dev_map)
        if dev_map > best_map:
            best_map = dev_map
            result.params = model.snapshot()
            result.best_epoch = epoch
    return result
