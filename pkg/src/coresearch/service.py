"""HTTP search service: retrieve top-k candidates, rerank, extract spans.

The service wraps one immutable snapshot (corpus + vocabulary + frozen model
parameters) loaded from a manifest. Queries arrive as raw text plus a
character range selecting the event mention; the range is mapped to a token
span through the tokenizer alignment, the pipeline runs per the request's
retriever/reader flags, and results carry character offsets for highlighting.
Gold annotations (cluster ids, gold mention spans) are never exposed.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .bm25 import InvertedIndex, QueryBuilderKind, bm25_top_k, build_bm25_index
from .corpus import CorpusSplit, Passage, load_corpus
from .dense import DenseIndex, build_index, encoders_from_params, load_index, top_k
from .checkpoint import load_checkpoint
from .encoder import (
    PASSAGE_TOKEN_BUDGET,
    QUERY_TOKEN_BUDGET,
    Encoder,
    encode_query,
)
from .errors import NotFoundError
from .manifest import Manifest, load_manifest, manifest_digest
from .metrics import RankedResult
from .reader import ReaderConfig, ReaderModel, ReaderVariant, rerank
from .textproc import MarkStyle, Tokenizer, Vocabulary, char_range_to_token_span

ADDR_ENV = "CORESEARCH_ADDR"
MANIFEST_ENV = "CORESEARCH_MANIFEST"

DEFAULT_TOP_K = 500
DEFAULT_PAGE_SIZE = 10


# ---------------------------------------------------------------------------
# Snapshot state
# ---------------------------------------------------------------------------


@dataclass
class ServiceState:
    split: CorpusSplit
    tokenizer: Tokenizer
    vocab: Vocabulary
    query_encoder: Encoder
    dense_index: DenseIndex
    bm25_index: InvertedIndex
    readers: dict[str, ReaderModel] = field(default_factory=dict)
    top_k: int = DEFAULT_TOP_K
    page_size: int = DEFAULT_PAGE_SIZE
    query_budget: int = QUERY_TOKEN_BUDGET
    mark_queries: bool = True
    digest: str = ""

    @property
    def mark_style(self) -> MarkStyle | None:
        return MarkStyle.RETRIEVER_S if self.mark_queries else None


def _reader_config(cfg: dict, variant: ReaderVariant) -> ReaderConfig:
    return ReaderConfig(
        variant=variant,
        dim=int(cfg.get("dim", 64)),
        max_seq=int(cfg.get("max_seq", 256)),
        query_budget=int(cfg.get("query_budget", QUERY_TOKEN_BUDGET)),
        stride=int(cfg.get("stride", 128)),
        max_span_len=int(cfg.get("max_span_len", 10)),
        hidden=int(cfg.get("hidden", 128)),
    )


def load_service_state(manifest: Manifest | str | Path) -> ServiceState:
    """Build the immutable serving snapshot from a manifest."""
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    digest = manifest_digest(manifest)
    config = manifest.config
    tokenizer = Tokenizer()
    corpus_path = manifest.path("corpus")
    name = corpus_path.stem if corpus_path.stem in ("train", "dev", "test") else "test"
    split = load_corpus(corpus_path, name=name, tokenizer=tokenizer)
    vocab = Vocabulary.load(manifest.path("vocab"))

    retriever_cfg = config.get("retriever", {})
    dim = int(retriever_cfg.get("dim", 64))
    max_positions = int(retriever_cfg.get("max_positions", 256))
    params, _ = load_checkpoint(manifest.checkpoint("retriever"))
    query_encoder, passage_encoder = encoders_from_params(params, vocab, dim, max_positions)

    index_path = manifest.checkpoint("dense_index")
    if index_path is not None:
        dense_index = load_index(index_path)
    else:
        dense_index = build_index(
            split,
            passage_encoder,
            tokenizer,
            int(retriever_cfg.get("passage_budget", PASSAGE_TOKEN_BUDGET)),
        )
    bm25_index = build_bm25_index(split, tokenizer)

    readers: dict[str, ReaderModel] = {}
    reader_cfg = config.get("reader", {})
    for name, variant in (
        ("reader_integrated", ReaderVariant.INTEGRATED),
        ("reader_baseline", ReaderVariant.DPR_BASELINE),
    ):
        path = manifest.checkpoint(name)
        if path is not None:
            reader_params, _ = load_checkpoint(path)
            readers[variant.value] = ReaderModel.from_params(
                reader_params, _reader_config(reader_cfg, variant), vocab
            )

    return ServiceState(
        split=split,
        tokenizer=tokenizer,
        vocab=vocab,
        query_encoder=query_encoder,
        dense_index=dense_index,
        bm25_index=bm25_index,
        readers=readers,
        top_k=int(config.get("top_k", DEFAULT_TOP_K)),
        page_size=int(config.get("page_size", DEFAULT_PAGE_SIZE)),
        query_budget=int(retriever_cfg.get("query_budget", QUERY_TOKEN_BUDGET)),
        mark_queries=bool(retriever_cfg.get("mark_queries", True)),
        digest=digest,
    )


# ---------------------------------------------------------------------------
# Wire models
# ---------------------------------------------------------------------------


class SearchRequest(BaseModel):
    text: str
    mention_char_start: int
    mention_char_end: int
    top_k: int | None = Field(default=None, ge=1)
    retriever: Literal["dense", "bm25"] = "dense"
    reader: Literal["baseline", "integrated", "none"] = "integrated"
    page: int | None = Field(default=None, ge=0)


class SpanModel(BaseModel):
    start: int
    end: int


class ResultModel(BaseModel):
    passage_id: str
    score: float
    select_prob: float | None = None
    span: SpanModel | None = None
    snippet: str
    highlight_start: int | None = None
    highlight_end: int | None = None


class QueryEcho(BaseModel):
    mention_char_start: int
    mention_char_end: int
    mention_token_start: int
    mention_token_end: int
    mention_text: str


class SearchResponse(BaseModel):
    results: list[ResultModel]
    timing_ms: float
    query: QueryEcho


class PassageResponse(BaseModel):
    id: str
    text: str


class HealthResponse(BaseModel):
    status: str
    manifest_digest: str


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def _result_model(state: ServiceState, r: RankedResult) -> ResultModel:
    passage = state.split.passage(r.passage_id)
    highlight_start = highlight_end = None
    span = None
    if r.span is not None:
        align = passage.alignment(state.tokenizer)
        span = SpanModel(start=r.span.start, end=r.span.end)
        highlight_start = align[r.span.start][0]
        highlight_end = align[r.span.end][1]
    return ResultModel(
        passage_id=r.passage_id,
        score=r.score if r.score is not None else 0.0,
        select_prob=r.select_prob,
        span=span,
        snippet=passage.text,
        highlight_start=highlight_start,
        highlight_end=highlight_end,
    )


def create_app(
    manifest_path: str | Path | None = None, state: ServiceState | None = None
) -> FastAPI:
    """Service over a snapshot; with neither argument (and no MANIFEST env),
    the app starts unloaded and answers 503 until given state."""
    app = FastAPI(title="coresearch")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if state is None:
        if manifest_path is None:
            manifest_path = os.environ.get(MANIFEST_ENV)
        if manifest_path is not None:
            state = load_service_state(manifest_path)
    app.state.service = state

    def current_state() -> ServiceState:
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="snapshot not loaded")
        return app.state.service

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        st = current_state()
        return HealthResponse(status="ok", manifest_digest=st.digest)

    @app.get("/passage/{passage_id}", response_model=PassageResponse)
    def get_passage(passage_id: str) -> PassageResponse:
        st = current_state()
        try:
            passage = st.split.passage(passage_id)
        except NotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown passage {passage_id!r}")
        return PassageResponse(id=passage.id, text=passage.text)

    @app.post("/search", response_model=SearchResponse)
    def search(req: SearchRequest) -> SearchResponse:
        st = current_state()
        started = time.perf_counter()
        if not (0 <= req.mention_char_start < req.mention_char_end <= len(req.text)):
            raise HTTPException(
                status_code=400,
                detail="mention offsets must satisfy 0 <= start < end <= len(text)",
            )
        alignment = st.tokenizer.tokenize(req.text).alignment
        token_span = char_range_to_token_span(
            alignment, req.mention_char_start, req.mention_char_end
        )
        if token_span is None:
            raise HTTPException(status_code=422, detail="mention selects zero tokens")
        query = Passage(id="__query__", text=req.text, mention=token_span)
        k = req.top_k if req.top_k is not None else st.top_k
        k = min(k, len(st.split))

        if req.retriever == "dense":
            enc = encode_query(
                query, st.query_encoder, st.tokenizer, st.mark_style, st.query_budget
            )
            retrieved = top_k(st.dense_index, enc.cls_rep, k)
        else:
            retrieved = bm25_top_k(
                query, QueryBuilderKind.MENTION_PLUS_SALIENT, st.bm25_index, k, st.tokenizer
            )

        if req.reader == "none":
            ranked = [RankedResult(passage_id=pid, score=score) for pid, score in retrieved]
        else:
            model = st.readers.get(req.reader)
            if model is None:
                raise HTTPException(
                    status_code=400,
                    detail=f"reader variant {req.reader!r} is not in the loaded snapshot",
                )
            ranked = rerank(query, retrieved, model, st.split, st.tokenizer)

        if req.page is not None:
            lo = req.page * st.page_size
            ranked = ranked[lo : lo + st.page_size]
        results = [_result_model(st, r) for r in ranked]
        echo = QueryEcho(
            mention_char_start=alignment[token_span.start][0],
            mention_char_end=alignment[token_span.end][1],
            mention_token_start=token_span.start,
            mention_token_end=token_span.end,
            mention_text=query.mention_text(st.tokenizer),
        )
        return SearchResponse(
            results=results,
            timing_ms=(time.perf_counter() - started) * 1000.0,
            query=echo,
        )

    return app


def serve(
    manifest_path: str | Path, addr: str | None = None
) -> None:  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    addr = addr or os.environ.get(ADDR_ENV, "127.0.0.1:8080")
    host, _, port = addr.rpartition(":")
    uvicorn.run(create_app(manifest_path), host=host or "127.0.0.1", port=int(port))
