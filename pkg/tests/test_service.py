"""HTTP service tests: snapshot loading, search contract, error codes.

The serving snapshot is built once per module from a small synthetic corpus
with randomly initialized (untrained) model parameters — every contract
tested here (shapes, orderings, distributions, determinism, redaction) must
hold regardless of model quality.
"""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from coresearch.checkpoint import save_checkpoint
from coresearch.corpus import write_corpus
from coresearch.databuild import SynthConfig, generate_synthetic_corpus
from coresearch.encoder import Encoder, EncoderConfig, EncoderMode
from coresearch.manifest import load_manifest, manifest_digest, save_manifest
from coresearch.nn import ParamStore
from coresearch.reader import ReaderConfig, ReaderModel, ReaderVariant
from coresearch.service import MANIFEST_ENV, create_app
from coresearch.textproc import Tokenizer, Vocabulary

DIM = 16
MAX_POSITIONS = 64
PAGE_SIZE = 3

READER_CFG = {
    "dim": 16,
    "max_seq": 48,
    "query_budget": 16,
    "stride": 16,
    "max_span_len": 4,
    "hidden": 8,
}


def _reader_config(variant: ReaderVariant) -> ReaderConfig:
    return ReaderConfig(variant=variant, **READER_CFG)


def _build_snapshot(root):
    tokenizer = Tokenizer()
    split = generate_synthetic_corpus(
        SynthConfig(
            n_clusters=10,
            cluster_size_range=(2, 3),
            n_destructors=5,
            type2_fraction=0.5,
            n_event_types=6,
            n_locations=30,
            n_years=30,
            split_fractions=(1.0, 0.0, 0.0),
            seed=5,
        )
    )["train"]
    write_corpus(split, root / "test.jsonl")
    vocab = Vocabulary.build(p.tokens(tokenizer) for p in split.passages.values())
    vocab.save(root / "vocab.txt")

    store = ParamStore(3)
    Encoder(EncoderConfig(DIM, MAX_POSITIONS, EncoderMode.BI_QUERY, 3), vocab, store)
    Encoder(EncoderConfig(DIM, MAX_POSITIONS, EncoderMode.BI_PASSAGE, 3), vocab, store)
    save_checkpoint(root / "retriever.ckpt", store.snapshot())

    for variant, fname in (
        (ReaderVariant.INTEGRATED, "reader-integrated.ckpt"),
        (ReaderVariant.DPR_BASELINE, "reader-baseline.ckpt"),
    ):
        model = ReaderModel(_reader_config(variant), vocab)
        save_checkpoint(root / fname, model.snapshot())

    config = {
        "top_k": 50,
        "page_size": PAGE_SIZE,
        "retriever": {
            "dim": DIM,
            "max_positions": MAX_POSITIONS,
            "query_budget": 16,
            "passage_budget": 48,
            "mark_queries": True,
        },
        "reader": dict(READER_CFG),
    }
    save_manifest(
        root / "manifest.json",
        {
            "corpus": "test.jsonl",
            "vocab": "vocab.txt",
            "checkpoints": {
                "retriever": "retriever.ckpt",
                "reader_integrated": "reader-integrated.ckpt",
                "reader_baseline": "reader-baseline.ckpt",
            },
            "config": config,
        },
    )
    save_manifest(
        root / "bare.json",
        {
            "corpus": "test.jsonl",
            "vocab": "vocab.txt",
            "checkpoints": {"retriever": "retriever.ckpt"},
            "config": {k: v for k, v in config.items() if k != "reader"},
        },
    )
    return split


@pytest.fixture(scope="module")
def snapshot(tmp_path_factory):
    root = tmp_path_factory.mktemp("snapshot")
    split = _build_snapshot(root)
    return root, split


@pytest.fixture(scope="module")
def client(snapshot):
    root, _ = snapshot
    return TestClient(create_app(root / "manifest.json"))


@pytest.fixture(scope="module")
def query(snapshot):
    """A search request body selecting a real mention from the corpus."""
    _, split = snapshot
    tokenizer = Tokenizer()
    passage = split.passage(sorted(split.queries)[0])
    align = passage.alignment(tokenizer)
    return {
        "text": passage.text,
        "mention_char_start": align[passage.mention.start][0],
        "mention_char_end": align[passage.mention.end][1],
    }


# ---------------------------------------------------------------------------
# Health and lifecycle
# ---------------------------------------------------------------------------


def test_health_reports_manifest_digest(client, snapshot):
    root, _ = snapshot
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["manifest_digest"] == manifest_digest(load_manifest(root / "manifest.json"))


def test_health_digest_stable_across_restarts(client, snapshot):
    root, _ = snapshot
    again = TestClient(create_app(root / "manifest.json"))
    assert (
        again.get("/health").json()["manifest_digest"]
        == client.get("/health").json()["manifest_digest"]
    )


def test_unloaded_app_answers_503(monkeypatch, query):
    monkeypatch.delenv(MANIFEST_ENV, raising=False)
    bare = TestClient(create_app())
    assert bare.get("/health").status_code == 503
    assert bare.get("/passage/p1").status_code == 503
    assert bare.post("/search", json=query).status_code == 503


def test_manifest_env_var_loads_snapshot(monkeypatch, snapshot):
    root, _ = snapshot
    monkeypatch.setenv(MANIFEST_ENV, str(root / "manifest.json"))
    via_env = TestClient(create_app())
    assert via_env.get("/health").status_code == 200


def test_cors_headers_enabled(client):
    resp = client.get("/health", headers={"Origin": "http://localhost:5173"})
    assert resp.headers["access-control-allow-origin"] == "*"


# ---------------------------------------------------------------------------
# Passage endpoint
# ---------------------------------------------------------------------------


def test_passage_returns_text(client, snapshot):
    _, split = snapshot
    pid = sorted(split.passages)[0]
    resp = client.get(f"/passage/{pid}")
    assert resp.status_code == 200
    assert resp.json() == {"id": pid, "text": split.passage(pid).text}


def test_passage_redacts_gold_annotations(client, snapshot):
    """Annotated passages come back with text only — no cluster or span keys."""
    _, split = snapshot
    annotated = next(pid for pid in sorted(split.queries) if split.passage(pid).cluster_id)
    body = client.get(f"/passage/{annotated}").json()
    assert set(body) == {"id", "text"}
    assert "cluster_id" not in body


def test_passage_unknown_id_404(client):
    resp = client.get("/passage/no-such-passage")
    assert resp.status_code == 404
    assert "no-such-passage" in resp.json()["detail"]


# ---------------------------------------------------------------------------
# Search: happy paths
# ---------------------------------------------------------------------------


def test_search_dense_without_reader(client, snapshot, query):
    _, split = snapshot
    resp = client.post("/search", json={**query, "reader": "none", "top_k": 5})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["results"]) == 5
    scores = [r["score"] for r in body["results"]]
    assert scores == sorted(scores, reverse=True)
    assert body["timing_ms"] >= 0.0
    for r in body["results"]:
        assert r["select_prob"] is None
        assert r["span"] is None
        assert r["snippet"] == split.passage(r["passage_id"]).text


def test_search_bm25_without_reader(client, query):
    resp = client.post(
        "/search", json={**query, "reader": "none", "retriever": "bm25", "top_k": 5}
    )
    assert resp.status_code == 200
    results = resp.json()["results"]
    assert len(results) == 5
    scores = [r["score"] for r in results]
    assert scores == sorted(scores, reverse=True)


def test_search_integrated_reranks_same_candidates(client, query):
    plain = client.post("/search", json={**query, "reader": "none", "top_k": 8}).json()
    reranked = client.post(
        "/search", json={**query, "reader": "integrated", "top_k": 8}
    ).json()
    assert {r["passage_id"] for r in reranked["results"]} == {
        r["passage_id"] for r in plain["results"]
    }


def test_search_select_probs_form_distribution(client, query):
    for reader in ("integrated", "baseline"):
        body = client.post("/search", json={**query, "reader": reader, "top_k": 10}).json()
        probs = [r["select_prob"] for r in body["results"]]
        assert all(p is not None and p >= 0.0 for p in probs)
        assert sum(probs) == pytest.approx(1.0, abs=1e-6)
        assert probs == sorted(probs, reverse=True)


def test_search_spans_and_highlights_are_consistent(client, snapshot, query):
    _, split = snapshot
    tokenizer = Tokenizer()
    body = client.post("/search", json={**query, "reader": "integrated", "top_k": 10}).json()
    spanned = [r for r in body["results"] if r["span"] is not None]
    assert spanned, "reader produced no spans at all"
    for r in spanned:
        span = r["span"]
        assert 0 <= span["start"] <= span["end"]
        assert span["end"] - span["start"] + 1 <= READER_CFG["max_span_len"]
        hs, he = r["highlight_start"], r["highlight_end"]
        assert 0 <= hs < he <= len(r["snippet"])
        tokens = split.passage(r["passage_id"]).tokens(tokenizer)
        assert (
            tokenizer.tokenize(r["snippet"][hs:he]).tokens
            == tokens[span["start"] : span["end"] + 1]
        )


def test_search_echoes_normalized_mention(client, snapshot, query):
    _, split = snapshot
    tokenizer = Tokenizer()
    passage = split.passage(sorted(split.queries)[0])
    echo = client.post("/search", json={**query, "top_k": 3}).json()["query"]
    assert echo["mention_char_start"] == query["mention_char_start"]
    assert echo["mention_char_end"] == query["mention_char_end"]
    assert echo["mention_token_start"] == passage.mention.start
    assert echo["mention_token_end"] == passage.mention.end
    assert echo["mention_text"] == passage.mention_text(tokenizer)


def test_search_partial_char_selection_snaps_to_tokens(client, query):
    """Selecting half a token still resolves to the whole covering token."""
    body = {**query, "mention_char_end": query["mention_char_start"] + 1, "top_k": 3}
    echo = client.post("/search", json=body).json()["query"]
    assert echo["mention_char_start"] == query["mention_char_start"]
    assert echo["mention_char_end"] > body["mention_char_end"]


def test_search_top_k_capped_at_corpus_size(client, snapshot, query):
    _, split = snapshot
    body = client.post("/search", json={**query, "reader": "none", "top_k": 10_000}).json()
    assert len(body["results"]) == len(split)


def test_search_default_top_k_from_config(client, snapshot, query):
    _, split = snapshot
    body = client.post("/search", json={**query, "reader": "none"}).json()
    assert len(body["results"]) == min(50, len(split))


def test_search_deterministic_modulo_timing(client, query):
    request = {**query, "reader": "integrated", "top_k": 10}
    first = client.post("/search", json=request).json()
    second = client.post("/search", json=request).json()
    first.pop("timing_ms")
    second.pop("timing_ms")
    assert first == second


def test_search_pagination_slices_full_ranking(client, query):
    request = {**query, "reader": "integrated", "top_k": 8}
    full = client.post("/search", json=request).json()["results"]
    assert len(full) == 8
    pages = []
    for page in range(4):
        got = client.post("/search", json={**request, "page": page}).json()["results"]
        assert len(got) <= PAGE_SIZE
        pages.extend(got)
    assert pages == full
    beyond = client.post("/search", json={**request, "page": 99}).json()
    assert beyond["results"] == []


# ---------------------------------------------------------------------------
# Search: error paths
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "start, end",
    [(7, 2), (4, 4), (-1, 3), (0, 10_000)],
    ids=["inverted", "empty", "negative", "past-end"],
)
def test_search_invalid_offsets_400(client, query, start, end):
    body = {**query, "mention_char_start": start, "mention_char_end": end}
    resp = client.post("/search", json=body)
    assert resp.status_code == 400
    assert "offsets" in resp.json()["detail"]


def test_search_whitespace_selection_422(client, query):
    gap = query["text"].index(" ")
    body = {**query, "mention_char_start": gap, "mention_char_end": gap + 1}
    resp = client.post("/search", json=body)
    assert resp.status_code == 422
    assert "zero tokens" in resp.json()["detail"]


@pytest.mark.parametrize(
    "patch",
    [{"reader": "spanbert"}, {"retriever": "faiss"}, {"top_k": 0}, {"page": -1}, {"text": None}],
    ids=["bad-reader", "bad-retriever", "zero-k", "negative-page", "null-text"],
)
def test_search_schema_violations_422(client, query, patch):
    assert client.post("/search", json={**query, **patch}).status_code == 422


def test_search_reader_missing_from_snapshot_400(snapshot, query):
    root, _ = snapshot
    bare = TestClient(create_app(root / "bare.json"))
    resp = bare.post("/search", json={**query, "reader": "integrated"})
    assert resp.status_code == 400
    assert "not in the loaded snapshot" in resp.json()["detail"]
    assert bare.post("/search", json={**query, "reader": "none"}).status_code == 200
