"""Token encoders producing per-token representations plus a pooled CLS row.

Two implementations share one contract:

* ``Encoder`` — a small trainable network. Every input sequence gets a [CLS]
  token prepended; each position's representation is

      rep_i = tanh(A @ emb(tok_i) + B @ mean_j emb(tok_j) + pos_i)

  so the mean-of-embeddings term gives every token (and the CLS pool) a view
  of the whole sequence while keeping the backward pass hand-derivable.
* ``PrecomputedEncoder`` — representations loaded from a binary file, for
  plugging in vectors computed elsewhere.

Bi-encoder roles (query vs passage) and the cross-encoder use distinct
parameter namespaces inside a shared ParamStore.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .checkpoint import _read_exact
from .corpus import MentionSpan, Passage
from .errors import FormatError, NotFoundError, ValidationError
from .nn import ParamStore
from .textproc import CLS, MarkStyle, Tokenizer, Vocabulary, mark_mention, truncate

QUERY_TOKEN_BUDGET = 64
PASSAGE_TOKEN_BUDGET = 180


class EncoderMode(Enum):
    BI_QUERY = "bi_query"
    BI_PASSAGE = "bi_passage"
    CROSS = "cross"

    @property
    def prefix(self) -> str:
        return {"bi_query": "eq", "bi_passage": "ep", "cross": "cx"}[self.value]


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 64
    max_positions: int = 256
    mode: EncoderMode = EncoderMode.BI_PASSAGE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValidationError(f"encoder dim must be >= 2, got {self.dim}")
        if self.max_positions < 2:
            raise ValidationError("max_positions must be >= 2")


@dataclass
class Encoding:
    """Per-token representations; row 0 is the pooled CLS representation.

    Carries the forward intermediates needed by ``backward``.
    """

    reps: np.ndarray
    token_ids: np.ndarray = field(repr=False, default=None)
    embs: np.ndarray = field(repr=False, default=None)
    mean_emb: np.ndarray = field(repr=False, default=None)
    _owner: "Encoder | None" = field(repr=False, default=None)

    @property
    def length(self) -> int:
        return self.reps.shape[0]

    @property
    def cls_rep(self) -> np.ndarray:
        return self.reps[0]

    def backward(self, d_reps: np.ndarray) -> None:
        if self._owner is None:
            raise ValidationError("encoding is frozen; no parameters to backpropagate into")
        self._owner._backward(self, d_reps)


class Encoder:
    """Trainable encoder over a vocabulary, parameters living in a ParamStore.

    Parameter names are ``{prefix}.emb`` (V x d), ``{prefix}.pos``
    (max_positions x d), ``{prefix}.A`` and ``{prefix}.B`` (d x d).
    """

    def __init__(
        self,
        cfg: EncoderConfig,
        vocab: Vocabulary,
        store: ParamStore | None = None,
        prefix: str | None = None,
    ):
        self.cfg = cfg
        self.vocab = vocab
        self.prefix = prefix if prefix is not None else cfg.mode.prefix
        self.store = store if store is not None else ParamStore(cfg.seed)
        d = cfg.dim
        p = self.prefix
        if f"{p}.emb" not in self.store:
            self.store.add(f"{p}.emb", (len(vocab), d), fan_in=d)
            self.store.add(f"{p}.pos", (cfg.max_positions, d), fan_in=d)
            self.store.add(f"{p}.A", (d, d))
            self.store.add(f"{p}.B", (d, d))

    def _tensors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        p = self.prefix
        return (
            self.store[f"{p}.emb"],
            self.store[f"{p}.pos"],
            self.store[f"{p}.A"],
            self.store[f"{p}.B"],
        )

    def encode(self, tokens: tuple[str, ...] | list[str]) -> Encoding:
        """Encode [CLS] + tokens; output length = len(tokens) + 1."""
        if len(tokens) > self.cfg.max_positions - 1:
            raise ValidationError(
                f"sequence of {len(tokens)} tokens exceeds max_positions-1 "
                f"({self.cfg.max_positions - 1})"
            )
        emb_table, pos_table, a, b = self._tensors()
        ids = np.array([self.vocab.id(CLS)] + self.vocab.encode(tokens))
        embs = emb_table[ids]
        mean_emb = embs.mean(axis=0)
        pre = embs @ a.T + mean_emb @ b.T + pos_table[: len(ids)]
        reps = np.tanh(pre)
        return Encoding(reps=reps, token_ids=ids, embs=embs, mean_emb=mean_emb, _owner=self)

    def _backward(self, enc: Encoding, d_reps: np.ndarray) -> None:
        if d_reps.shape != enc.reps.shape:
            raise ValidationError(
                f"gradient shape {d_reps.shape} != encoding shape {enc.reps.shape}"
            )
        emb_table, pos_table, a, b = self._tensors()
        p = self.prefix
        n = enc.length
        d_pre = d_reps * (1.0 - enc.reps * enc.reps)
        self.store.grad(f"{p}.A")[...] += d_pre.T @ enc.embs
        d_pre_sum = d_pre.sum(axis=0)
        self.store.grad(f"{p}.B")[...] += np.outer(d_pre_sum, enc.mean_emb)
        self.store.grad(f"{p}.pos")[:n] += d_pre
        d_embs = d_pre @ a + np.outer(np.ones(n) / n, d_pre_sum @ b)
        np.add.at(self.store.grad(f"{p}.emb"), enc.token_ids, d_embs)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: self.store[k].copy() for k in self.store.names() if k.startswith(self.prefix + ".")}


def query_tokens(
    passage: Passage,
    tokenizer: Tokenizer,
    style: MarkStyle | None = MarkStyle.RETRIEVER_S,
    budget: int = QUERY_TOKEN_BUDGET,
) -> tuple[list[str], MentionSpan]:
    """Mention-marked, budget-truncated token sequence for a query passage.

    ``style=None`` skips marker insertion (ablation mode) but still keeps the
    mention inside the truncation window.
    """
    if passage.mention is None:
        raise ValidationError(f"passage {passage.id!r} has no mention to mark")
    tokens = passage.tokens(tokenizer)
    span = passage.mention
    if style is not None:
        tokens, span = mark_mention(tokens, span, style)
    return truncate(tokens, budget, span)


def passage_tokens(
    passage: Passage, tokenizer: Tokenizer, budget: int = PASSAGE_TOKEN_BUDGET
) -> list[str]:
    tokens, _ = truncate(passage.tokens(tokenizer), budget)
    return tokens


def encode_query(
    passage: Passage,
    encoder: Encoder,
    tokenizer: Tokenizer,
    style: MarkStyle | None = MarkStyle.RETRIEVER_S,
    budget: int = QUERY_TOKEN_BUDGET,
) -> Encoding:
    tokens, _ = query_tokens(passage, tokenizer, style, budget)
    return encoder.encode(tokens)


# ---------------------------------------------------------------------------
# Precomputed representations
# ---------------------------------------------------------------------------


class PrecomputedEncoder:
    """Passage-id keyed store of fixed token representations."""

    def __init__(self, reps: dict[str, np.ndarray], dim: int):
        for pid, arr in reps.items():
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise FormatError(
                    f"passage {pid!r}: representation shape {arr.shape} does not match dim {dim}"
                )
        self._reps = reps
        self.dim = dim

    def __len__(self) -> int:
        return len(self._reps)

    def ids(self) -> list[str]:
        return list(self._reps)

    def encode(self, passage_id: str) -> Encoding:
        if passage_id not in self._reps:
            raise NotFoundError(f"no stored representation for passage {passage_id!r}")
        return Encoding(reps=self._reps[passage_id])


def save_precomputed(path: str | Path, reps: dict[str, np.ndarray]) -> None:
    """Binary layout: u32 d, u32 count, then per passage u32 id-byte-length,
    id bytes, u32 n_rows, n_rows*d little-endian float64."""
    if not reps:
        raise ValidationError("refusing to write an empty representation file")
    dims = {arr.shape[1] for arr in reps.values()}
    if len(dims) != 1:
        raise ValidationError(f"inconsistent representation dims: {sorted(dims)}")
    (d,) = dims
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", d, len(reps)))
        for pid, arr in reps.items():
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.shape[0]))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def load_precomputed(path: str | Path, expected_dim: int | None = None) -> PrecomputedEncoder:
    with open(path, "rb") as fh:
        d, count = struct.unpack("<II", _read_exact(fh, 8))
        if expected_dim is not None and d != expected_dim:
            raise FormatError(f"representation dim {d} does not match expected {expected_dim}")
        reps: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<I", _read_exact(fh, 4))
            pid = _read_exact(fh, id_len).decode("utf-8")
            (n_rows,) = struct.unpack("<I", _read_exact(fh, 4))
            data = np.frombuffer(_read_exact(fh, n_rows * d * 8), dtype="<f8")
            reps[pid] = data.reshape(n_rows, d).astype(np.float64)
        if fh.read(1):
            raise FormatError("trailing bytes after final passage record")
    return PrecomputedEncoder(reps, d)
