"""Command-line driver for every workflow: data building, synthetic corpus
generation, training, indexing, retrieval, reranking, evaluation, serving,
and gradient verification.

Option precedence: command-line flag > config-file value > built-in default.
The config file is INI-style, one section per subcommand, keys spelled like
the long flags without the leading dashes (e.g. ``n-clusters``). Every
subcommand that writes artifacts also writes ``effective-config.json`` (the
fully resolved options) and ``summary.json`` (machine-readable results) into
its output directory; neither contains timestamps, so re-runs under the same
seed are byte-identical.

Exit codes: 0 success, 2 validation/config/usage errors, 1 runtime errors.
"""

from __future__ import annotations

import configparser
import functools
import hashlib
import json
import sys
from pathlib import Path

import click

from .bm25 import (
    DEFAULT_B,
    DEFAULT_K1,
    QueryBuilderKind,
    bm25_run,
    build_bm25_index,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import load_corpus, write_corpus
from .databuild import (
    SPLIT_NAMES,
    BuildConfig,
    SynthConfig,
    build_splits,
    filter_destructors,
    generate_synthetic_corpus,
    load_cluster_records,
    load_raw_paragraphs,
)
from .dense import (
    RetrieverConfig,
    build_index,
    encoders_from_params,
    load_index,
    run_retrieval,
    save_index,
    train_retriever,
)
from .errors import ConfigError, CoresearchError, ParseError, ValidationError
from .metrics import (
    RankedResult,
    Run,
    evaluate_run,
    load_run,
    render_table,
    save_rerank_run,
    save_run,
)
from .reader import (
    ReaderConfig,
    ReaderModel,
    ReaderVariant,
    rerank as rerank_ranking,
    train_reader,
)
from .textproc import Tokenizer, Vocabulary

_BM25_KINDS = {
    "full": QueryBuilderKind.FULL_CONTEXT,
    "sentence": QueryBuilderKind.MENTION_SENTENCE,
    "salient": QueryBuilderKind.MENTION_PLUS_SALIENT,
}


def guarded(fn):
    """Map domain errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ConfigError, ParseError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (CoresearchError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


class Settings:
    """INI config file wrapper; sections are subcommand names."""

    def __init__(self, path: str | None):
        self.parser = configparser.ConfigParser()
        if path is not None:
            if not Path(path).is_file():
                raise ConfigError(f"config file {path!r} does not exist")
            self.parser.read(path)

    def resolve(self, section: str, key: str, flag_value, default, cast=str):
        """flag > file > default; booleans use INI truthy parsing."""
        if flag_value is not None:
            return flag_value
        if self.parser.has_option(section, key):
            if cast is bool:
                return self.parser.getboolean(section, key)
            try:
                return cast(self.parser.get(section, key))
            except ValueError as exc:
                raise ConfigError(f"bad config value for [{section}] {key}: {exc}") from None
        return default


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(out_dir: Path, command: str, effective: dict, summary: dict) -> None:
    _write_json(out_dir / "effective-config.json", {"command": command, **effective})
    _write_json(out_dir / "summary.json", {"command": command, **summary})


def _load_any(path: str, tokenizer: Tokenizer):
    """Load a corpus whatever its file name; split names are an enum, so
    fall back to "test" when the stem is not one of them."""
    stem = Path(path).stem
    return load_corpus(path, name=stem if stem in SPLIT_NAMES else "test",
                       tokenizer=tokenizer)


def _pairs(run: Run) -> dict[str, list[tuple[str, float]]]:
    return {
        qid: [(r.passage_id, r.score if r.score is not None else 0.0) for r in results]
        for qid, results in run.items()
    }


def _run_from_pairs(pairs: dict[str, list[tuple[str, float]]]) -> Run:
    return {
        qid: [RankedResult(passage_id=pid, score=s) for pid, s in ranked]
        for qid, ranked in pairs.items()
    }


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="INI config file; flags override its values.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Event coreference search: build data, train, index, search, serve."""
    try:
        ctx.obj = Settings(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


# ---------------------------------------------------------------------------
# Data building
# ---------------------------------------------------------------------------


@main.command("synth-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--n-clusters", type=int, default=None)
@click.option("--cluster-size-min", type=int, default=None)
@click.option("--cluster-size-max", type=int, default=None)
@click.option("--n-destructors", type=int, default=None)
@click.option("--type2-fraction", type=float, default=None)
@click.option("--n-event-types", type=int, default=None)
@click.option("--n-locations", type=int, default=None)
@click.option("--n-years", type=int, default=None)
@click.option("--split-fractions", type=str, default=None,
              help="Comma-separated train,dev,test fractions (default 0.6,0.2,0.2).")
@click.option("--seed", type=int, default=None)
@click.pass_obj
@guarded
def synth_data(settings: Settings, out: str, **flags) -> None:
    """Generate a deterministic synthetic corpus with a known answer key."""
    section = "synth-data"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    fractions_raw = r("split-fractions", "0.6,0.2,0.2", str)
    try:
        fractions = tuple(float(x) for x in fractions_raw.split(","))
    except ValueError:
        raise ConfigError(f"bad split fractions {fractions_raw!r}")
    if len(fractions) != 3:
        raise ConfigError("split-fractions needs exactly three values")
    cfg = SynthConfig(
        n_clusters=r("n-clusters", 40, int),
        cluster_size_range=(r("cluster-size-min", 2, int), r("cluster-size-max", 5, int)),
        n_destructors=r("n-destructors", 100, int),
        type2_fraction=r("type2-fraction", 0.9, float),
        n_event_types=r("n-event-types", 40, int),
        n_locations=r("n-locations", 400, int),
        n_years=r("n-years", 400, int),
        split_fractions=fractions,
        seed=r("seed", 0, int),
    )
    splits = generate_synthetic_corpus(cfg)
    out_dir = Path(out)
    files, counts = {}, {}
    for name in SPLIT_NAMES:
        path = out_dir / f"{name}.jsonl"
        write_corpus(splits[name], path)
        files[name] = {"path": str(path), "sha256": _sha256(path)}
        counts[name] = {
            "passages": len(splits[name]),
            "clusters": len(splits[name].clusters),
            "queries": len(splits[name].queries),
        }
    effective = {
        "n_clusters": cfg.n_clusters,
        "cluster_size_range": list(cfg.cluster_size_range),
        "n_destructors": cfg.n_destructors,
        "type2_fraction": cfg.type2_fraction,
        "n_event_types": cfg.n_event_types,
        "n_locations": cfg.n_locations,
        "n_years": cfg.n_years,
        "split_fractions": list(cfg.split_fractions),
        "seed": cfg.seed,
    }
    _emit(out_dir, "synth-data", effective, {"files": files, "counts": counts})
    click.echo(f"wrote {sum(c['passages'] for c in counts.values())} passages to {out_dir}")


@main.command("build-data")
@click.option("--clusters", "clusters_path", required=True, type=click.Path(exists=True))
@click.option("--paragraphs", "paragraph_paths", multiple=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--train-clusters", type=int, default=None)
@click.option("--dev-clusters", type=int, default=None)
@click.option("--test-clusters", type=int, default=None)
@click.option("--min-cluster-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_obj
@guarded
def build_data(
    settings: Settings,
    clusters_path: str,
    paragraph_paths: tuple[str, ...],
    out: str,
    **flags,
) -> None:
    """Build train/dev/test splits from annotated clusters + raw paragraphs."""
    section = "build-data"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    records = load_cluster_records(clusters_path)
    counts = {
        "train": r("train-clusters", None, int),
        "dev": r("dev-clusters", None, int),
        "test": r("test-clusters", None, int),
    }
    if any(v is None for v in counts.values()):
        raise ConfigError("train/dev/test cluster counts are all required")
    paragraphs = []
    for path in paragraph_paths:
        paragraphs.extend(load_raw_paragraphs(path))
    destructors = filter_destructors(paragraphs, records)
    cfg = BuildConfig(
        split_cluster_counts=counts,
        seed=r("seed", 0, int),
        destructor_sources=tuple(paragraph_paths),
        min_cluster_size=r("min-cluster-size", 2, int),
    )
    splits = build_splits(records, destructors, cfg)
    out_dir = Path(out)
    files, split_counts = {}, {}
    for name in SPLIT_NAMES:
        path = out_dir / f"{name}.jsonl"
        write_corpus(splits[name], path)
        files[name] = {"path": str(path), "sha256": _sha256(path)}
        split_counts[name] = {
            "passages": len(splits[name]),
            "clusters": len(splits[name].clusters),
        }
    effective = {
        "clusters": clusters_path,
        "paragraphs": list(paragraph_paths),
        "split_cluster_counts": counts,
        "min_cluster_size": cfg.min_cluster_size,
        "seed": cfg.seed,
    }
    summary = {
        "files": files,
        "counts": split_counts,
        "paragraphs_in": len(paragraphs),
        "destructors_kept": len(destructors),
    }
    _emit(out_dir, "build-data", effective, summary)
    click.echo(
        f"{len(records)} clusters, {len(destructors)}/{len(paragraphs)} paragraphs kept"
    )


# ---------------------------------------------------------------------------
# Training and indexing
# ---------------------------------------------------------------------------


@main.command("train-retriever")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--dev", "dev_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dim", type=int, default=None)
@click.option("--max-positions", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--weight-decay", type=float, default=None)
@click.option("--warmup-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--query-budget", type=int, default=None)
@click.option("--passage-budget", type=int, default=None)
@click.option("--mark-mentions/--no-mark-mentions", "mark_mentions", default=None)
@click.option("--hard-negative-pool", type=int, default=None)
@click.option("--include-other-positives/--no-include-other-positives",
              "include_other_positives", default=None)
@click.option("--exclude-same-cluster/--no-exclude-same-cluster",
              "exclude_same_cluster", default=None)
@click.option("--eval-k", type=int, default=None)
@click.pass_obj
@guarded
def train_retriever_cmd(
    settings: Settings, train_path: str, dev_path: str, out: str, **flags
) -> None:
    """Train the bi-encoder retriever; emits the best-epoch checkpoint."""
    section = "train-retriever"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    cfg = RetrieverConfig(
        dim=r("dim", 64, int),
        max_positions=r("max-positions", 256, int),
        epochs=r("epochs", 5, int),
        batch_size=r("batch-size", 64, int),
        lr=r("lr", 1e-2, float),
        weight_decay=r("weight-decay", 0.01, float),
        warmup_fraction=r("warmup-fraction", 0.1, float),
        seed=r("seed", 0, int),
        query_budget=r("query-budget", 64, int),
        passage_budget=r("passage-budget", 180, int),
        mark_queries=r("mark-mentions", True, bool),
        hard_negative_pool=r("hard-negative-pool", 20, int),
        include_other_positives=r("include-other-positives", True, bool),
        exclude_same_cluster=r("exclude-same-cluster", False, bool),
        eval_k=r("eval-k", 10, int),
    )
    tokenizer = Tokenizer()
    train_split = load_corpus(train_path, name="train", tokenizer=tokenizer)
    dev_split = load_corpus(dev_path, name="dev", tokenizer=tokenizer)
    result = train_retriever(train_split, dev_split, cfg, tokenizer=tokenizer)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "retriever.ckpt"
    save_checkpoint(ckpt, result.params)
    vocab_path = out_dir / "vocab.txt"
    result.vocab.save(vocab_path)
    effective = {
        "train": train_path,
        "dev": dev_path,
        **{k: getattr(cfg, k) for k in (
            "dim", "max_positions", "epochs", "batch_size", "lr", "weight_decay",
            "warmup_fraction", "seed", "query_budget", "passage_budget",
            "mark_queries", "hard_negative_pool", "include_other_positives",
            "exclude_same_cluster", "eval_k",
        )},
    }
    summary = {
        "checkpoint": str(ckpt),
        "vocab": str(vocab_path),
        "epoch_losses": result.epoch_losses,
        "dev_mrr": result.dev_mrr,
        "best_epoch": result.best_epoch,
        "best_dev_mrr": max(result.dev_mrr) if result.dev_mrr else None,
    }
    _emit(out_dir, "train-retriever", effective, summary)
    click.echo(
        f"best epoch {result.best_epoch}: dev MRR@{cfg.eval_k} "
        f"{max(result.dev_mrr):.4f}" if result.dev_mrr else "no dev metrics"
    )


@main.command("build-index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dim", type=int, default=None)
@click.option("--max-positions", type=int, default=None)
@click.option("--passage-budget", type=int, default=None)
@click.pass_obj
@guarded
def build_index_cmd(
    settings: Settings, corpus_path: str, ckpt_path: str, vocab_path: str, out: str, **flags
) -> None:
    """Encode a corpus with the passage encoder into a flat dense index."""
    section = "build-index"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    dim = r("dim", 64, int)
    max_positions = r("max-positions", 256, int)
    budget = r("passage-budget", 180, int)
    tokenizer = Tokenizer()
    split = _load_any(corpus_path, tokenizer)
    vocab = Vocabulary.load(vocab_path)
    params, _ = load_checkpoint(ckpt_path)
    _, passage_encoder = encoders_from_params(params, vocab, dim, max_positions)
    index = build_index(split, passage_encoder, tokenizer, budget)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / "dense.idx"
    save_index(index, index_path)
    effective = {
        "corpus": corpus_path, "checkpoint": ckpt_path, "vocab": vocab_path,
        "dim": dim, "max_positions": max_positions, "passage_budget": budget,
    }
    _emit(out_dir, "build-index", effective,
          {"index": str(index_path), "passages": len(index), "dim": index.dim})
    click.echo(f"indexed {len(index)} passages at dim {index.dim}")


# ---------------------------------------------------------------------------
# Retrieval, reranking, evaluation
# ---------------------------------------------------------------------------


@main.command("run-retrieval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["dense", "bm25"]), default=None)
@click.option("--k", type=int, default=None)
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), default=None)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_path", type=click.Path(exists=True), default=None)
@click.option("--dim", type=int, default=None)
@click.option("--max-positions", type=int, default=None)
@click.option("--query-budget", type=int, default=None)
@click.option("--passage-budget", type=int, default=None)
@click.option("--mark-mentions/--no-mark-mentions", "mark_mentions", default=None)
@click.option("--builder", type=click.Choice(sorted(_BM25_KINDS)), default=None,
              help="BM25 query builder (bm25 mode only).")
@click.option("--k1", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.pass_obj
@guarded
def run_retrieval_cmd(
    settings: Settings,
    corpus_path: str,
    out: str,
    ckpt_path: str | None,
    vocab_path: str | None,
    index_path: str | None,
    **flags,
) -> None:
    """Rank the collection for every query in the corpus; writes a run file."""
    section = "run-retrieval"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    mode = r("mode", "dense", str)
    k = r("k", 500, int)
    tokenizer = Tokenizer()
    split = _load_any(corpus_path, tokenizer)
    effective: dict = {"corpus": corpus_path, "mode": mode, "k": k}
    if mode == "dense":
        if ckpt_path is None or vocab_path is None:
            raise ConfigError("dense mode requires --checkpoint and --vocab")
        dim = r("dim", 64, int)
        max_positions = r("max-positions", 256, int)
        query_budget = r("query-budget", 64, int)
        passage_budget = r("passage-budget", 180, int)
        mark = r("mark-mentions", True, bool)
        vocab = Vocabulary.load(vocab_path)
        params, _ = load_checkpoint(ckpt_path)
        query_encoder, passage_encoder = encoders_from_params(params, vocab, dim, max_positions)
        if index_path is not None:
            index = load_index(index_path)
        else:
            index = build_index(split, passage_encoder, tokenizer, passage_budget)
        from .textproc import MarkStyle

        pairs = run_retrieval(
            split, index, query_encoder, tokenizer,
            style=MarkStyle.RETRIEVER_S if mark else None,
            budget=query_budget, k=k,
        )
        effective.update(
            checkpoint=ckpt_path, vocab=vocab_path, index=index_path, dim=dim,
            max_positions=max_positions, query_budget=query_budget,
            passage_budget=passage_budget, mark_mentions=mark,
        )
    else:
        builder = r("builder", "salient", str)
        k1 = r("k1", DEFAULT_K1, float)
        b = r("b", DEFAULT_B, float)
        index = build_bm25_index(split, tokenizer)
        pairs = bm25_run(split, index, _BM25_KINDS[builder], k, tokenizer, k1=k1, b=b)
        effective.update(builder=builder, k1=k1, b=b)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_path = out_dir / "run.jsonl"
    save_run(_run_from_pairs(pairs), run_path)
    _emit(out_dir, "run-retrieval", effective,
          {"run": str(run_path), "queries": len(pairs), "sha256": _sha256(run_path)})
    click.echo(f"ranked {len(pairs)} queries into {run_path}")


@main.command("train-reader")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--dev", "dev_path", required=True, type=click.Path(exists=True))
@click.option("--train-run", "train_run_path", required=True, type=click.Path(exists=True))
@click.option("--dev-run", "dev_run_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--variant", type=click.Choice(["integrated", "baseline"]), default=None)
@click.option("--dim", type=int, default=None)
@click.option("--max-seq", type=int, default=None)
@click.option("--query-budget", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--max-span-len", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--m-negatives", type=int, default=None)
@click.option("--lam", type=float, default=None)
@click.option("--bidirectional/--no-bidirectional", "bidirectional", default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--weight-decay", type=float, default=None)
@click.option("--warmup-fraction", type=float, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--rerank-depth", type=int, default=None)
@click.pass_obj
@guarded
def train_reader_cmd(
    settings: Settings,
    train_path: str,
    dev_path: str,
    train_run_path: str,
    dev_run_path: str,
    vocab_path: str,
    out: str,
    **flags,
) -> None:
    """Train a reader on retrieved candidates; emits the best-epoch checkpoint."""
    section = "train-reader"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    variant_name = r("variant", "integrated", str)
    cfg = ReaderConfig(
        variant=ReaderVariant(variant_name),
        dim=r("dim", 64, int),
        max_seq=r("max-seq", 256, int),
        query_budget=r("query-budget", 64, int),
        stride=r("stride", 128, int),
        max_span_len=r("max-span-len", 10, int),
        hidden=r("hidden", 128, int),
        m_negatives=r("m-negatives", 24, int),
        lam=flags["lam"] if flags["lam"] is not None else settings.resolve(section, "lam", None, None, float),
        bidirectional_antecedent=r("bidirectional", False, bool),
        batch_size=r("batch-size", 24, int),
        seed=r("seed", 0, int),
    )
    tokenizer = Tokenizer()
    train_split = load_corpus(train_path, name="train", tokenizer=tokenizer)
    dev_split = load_corpus(dev_path, name="dev", tokenizer=tokenizer)
    vocab = Vocabulary.load(vocab_path)
    result = train_reader(
        train_split,
        dev_split,
        _pairs(load_run(train_run_path)),
        _pairs(load_run(dev_run_path)),
        vocab,
        cfg,
        tokenizer=tokenizer,
        epochs=r("epochs", 5, int),
        lr=r("lr", 1e-2, float),
        weight_decay=r("weight-decay", 0.01, float),
        warmup_fraction=r("warmup-fraction", 0.1, float),
        dropout_rate=r("dropout", 0.1, float),
        rerank_depth=r("rerank-depth", 50, int),
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / f"reader-{variant_name}.ckpt"
    save_checkpoint(ckpt, result.params)
    effective = {
        "train": train_path, "dev": dev_path, "train_run": train_run_path,
        "dev_run": dev_run_path, "vocab": vocab_path, "variant": variant_name,
        "dim": cfg.dim, "max_seq": cfg.max_seq, "query_budget": cfg.query_budget,
        "stride": cfg.stride, "max_span_len": cfg.max_span_len, "hidden": cfg.hidden,
        "m_negatives": cfg.m_negatives, "lam": cfg.lam,
        "bidirectional": cfg.bidirectional_antecedent, "batch_size": cfg.batch_size,
        "seed": cfg.seed,
    }
    summary = {
        "checkpoint": str(ckpt),
        "epoch_losses": result.epoch_losses,
        "dev_map10": result.dev_map10,
        "best_epoch": result.best_epoch,
        "skipped_examples": result.skipped,
        "discarded_queries": result.discarded_queries,
    }
    _emit(out_dir, "train-reader", effective, summary)
    click.echo(
        f"best epoch {result.best_epoch}: dev mAP@10 {max(result.dev_map10):.4f}"
    )


@main.command("rerank")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--variant", type=click.Choice(["integrated", "baseline"]), default=None)
@click.option("--dim", type=int, default=None)
@click.option("--max-seq", type=int, default=None)
@click.option("--query-budget", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--max-span-len", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--depth", type=int, default=None,
              help="Rerank the top-depth candidates of each ranking (0 = all).")
@click.pass_obj
@guarded
def rerank_cmd(
    settings: Settings,
    corpus_path: str,
    run_path: str,
    ckpt_path: str,
    vocab_path: str,
    out: str,
    **flags,
) -> None:
    """Rerank a retrieval run with a trained reader; writes spans and probs."""
    section = "rerank"
    r = lambda key, default, cast: settings.resolve(section, key, flags[key.replace("-", "_")], default, cast)
    variant_name = r("variant", "integrated", str)
    cfg = ReaderConfig(
        variant=ReaderVariant(variant_name),
        dim=r("dim", 64, int),
        max_seq=r("max-seq", 256, int),
        query_budget=r("query-budget", 64, int),
        stride=r("stride", 128, int),
        max_span_len=r("max-span-len", 10, int),
        hidden=r("hidden", 128, int),
    )
    depth = r("depth", 50, int)
    tokenizer = Tokenizer()
    split = _load_any(corpus_path, tokenizer)
    vocab = Vocabulary.load(vocab_path)
    params, _ = load_checkpoint(ckpt_path)
    model = ReaderModel.from_params(params, cfg, vocab)
    pairs = _pairs(load_run(run_path))
    reranked: Run = {}
    for qid in sorted(pairs):
        head = pairs[qid] if depth == 0 else pairs[qid][:depth]
        reranked[qid] = rerank_ranking(split.passage(qid), head, model, split, tokenizer)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rerank_path = out_dir / "rerank.jsonl"
    save_rerank_run(reranked, rerank_path)
    effective = {
        "corpus": corpus_path, "run": run_path, "checkpoint": ckpt_path,
        "vocab": vocab_path, "variant": variant_name, "depth": depth,
        "dim": cfg.dim, "max_seq": cfg.max_seq, "query_budget": cfg.query_budget,
        "stride": cfg.stride, "max_span_len": cfg.max_span_len, "hidden": cfg.hidden,
    }
    _emit(out_dir, "rerank", effective,
          {"rerank": str(rerank_path), "queries": len(reranked),
           "sha256": _sha256(rerank_path)})
    click.echo(f"reranked {len(reranked)} queries into {rerank_path}")


@main.command("eval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--label", type=str, default=None)
@click.pass_obj
@guarded
def eval_cmd(settings: Settings, corpus_path: str, run_path: str, out: str, label: str | None) -> None:
    """Score a run file against gold clusters; writes the full metric report."""
    label = settings.resolve("eval", "label", label, Path(run_path).stem, str)
    tokenizer = Tokenizer()
    split = _load_any(corpus_path, tokenizer)
    run = load_run(run_path)
    report = evaluate_run(run, split, tokenizer)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    _emit(out_dir, "eval",
          {"corpus": corpus_path, "run": run_path, "label": label},
          {"report": str(report_path), "metrics": report.to_dict()["metrics"]})
    click.echo(render_table(report, label))


# ---------------------------------------------------------------------------
# Serving and verification
# ---------------------------------------------------------------------------


@main.command("serve")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), default=None)
@click.option("--addr", type=str, default=None, help="host:port (default 127.0.0.1:8080).")
@click.pass_obj
@guarded
def serve_cmd(settings: Settings, manifest_path: str | None, addr: str | None) -> None:
    """Serve the HTTP search API from a snapshot manifest."""
    import os

    from .service import MANIFEST_ENV, serve

    manifest_path = settings.resolve(
        "serve", "manifest", manifest_path, os.environ.get(MANIFEST_ENV), str
    )
    if manifest_path is None:
        raise ConfigError(f"no manifest: pass --manifest or set {MANIFEST_ENV}")
    addr = settings.resolve("serve", "addr", addr, None, str)
    serve(manifest_path, addr)


@main.command("grad-check")
@click.option("--seeds", type=int, default=None, help="Number of random seeds per target.")
@click.option("--probes", type=int, default=None)
@click.option("--tolerance", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
@guarded
def grad_check_cmd(
    settings: Settings, seeds: int | None, probes: int | None,
    tolerance: float | None, out: str | None,
) -> None:
    """Finite-difference verification of every hand-derived backward pass."""
    seeds = settings.resolve("grad-check", "seeds", seeds, 20, int)
    probes = settings.resolve("grad-check", "probes", probes, 12, int)
    tolerance = settings.resolve("grad-check", "tolerance", tolerance, 1e-4, float)
    results = run_gradient_suite(n_seeds=seeds, probe_count=probes)
    worst = max(results.values())
    for target in sorted(results):
        status = "ok" if results[target] <= tolerance else "FAIL"
        click.echo(f"{target:24s} max rel err {results[target]:.3e}  {status}")
    if out is not None:
        out_dir = Path(out)
        _emit(out_dir, "grad-check",
              {"seeds": seeds, "probes": probes, "tolerance": tolerance},
              {"max_rel_err": {k: float(v) for k, v in results.items()},
               "worst": float(worst), "passed": bool(worst <= tolerance)})
    if worst > tolerance:
        click.echo(f"error: worst relative error {worst:.3e} > {tolerance}", err=True)
        sys.exit(1)


def run_gradient_suite(n_seeds: int = 20, probe_count: int = 12) -> dict[str, float]:
    """Max relative finite-difference error per loss across seeds.

    Covers the contrastive retriever loss, both reader selection paths, and a
    plain encoder reduction; every run uses a fresh tiny synthetic corpus.
    """
    import numpy as np

    from .dense import TrainExample, contrastive_loss, mine_hard_negatives
    from .encoder import Encoder as Enc, EncoderConfig, EncoderMode
    from .nn import ParamStore, grad_check
    from .reader import ReaderExample, reader_loss
    from .textproc import MarkStyle

    tokenizer = Tokenizer()
    worst = {"encoder": 0.0, "contrastive": 0.0,
             "reader-integrated": 0.0, "reader-baseline": 0.0}
    for seed in range(n_seeds):
        corpus = generate_synthetic_corpus(
            SynthConfig(
                n_clusters=4, cluster_size_range=(2, 3), n_destructors=6,
                type2_fraction=0.5, n_locations=12, n_years=12,
                split_fractions=(1.0, 0.0, 0.0), seed=seed,
            )
        )["train"]
        vocab = Vocabulary.build(p.tokens(tokenizer) for p in corpus.passages.values())
        rng = np.random.default_rng(seed)

        store = ParamStore(seed)
        encoder = Enc(EncoderConfig(8, 64, EncoderMode.CROSS, seed), vocab, store)
        sample = next(iter(corpus.passages.values()))

        def f_encoder():
            store.zero_grads()
            enc = encoder.encode(sample.tokens(tokenizer)[:20])
            probe = np.sin(np.arange(enc.reps.size)).reshape(enc.reps.shape)
            enc.backward(probe)
            return float((enc.reps * probe).sum())

        worst["encoder"] = max(
            worst["encoder"], grad_check(f_encoder, store, probe_count, seed=seed)
        )

        bi_store = ParamStore(seed)
        qe = Enc(EncoderConfig(8, 64, EncoderMode.BI_QUERY, seed), vocab, bi_store)
        pe = Enc(EncoderConfig(8, 64, EncoderMode.BI_PASSAGE, seed), vocab, bi_store)
        bm25_index = build_bm25_index(corpus, tokenizer)
        from .dense import coreference_pairs

        batch = []
        for qid, pid in coreference_pairs(corpus)[:3]:
            neg = mine_hard_negatives(
                corpus.passage(qid), corpus, bm25_index, tokenizer, rng=rng
            )
            batch.append(
                TrainExample(corpus.passage(qid), corpus.passage(pid), corpus.passage(neg))
            )

        def f_contrastive():
            bi_store.zero_grads()
            return contrastive_loss(
                batch, qe, pe, tokenizer,
                mark_style=MarkStyle.RETRIEVER_S, query_budget=24, passage_budget=40,
            )

        worst["contrastive"] = max(
            worst["contrastive"], grad_check(f_contrastive, bi_store, probe_count, seed=seed)
        )

        qid, pid = coreference_pairs(corpus)[0]
        negatives = tuple(
            corpus.passage(p) for p in sorted(corpus.passages)
            if corpus.passages[p].cluster_id != corpus.passage(qid).cluster_id
        )[:2]
        example = ReaderExample(corpus.passage(qid), corpus.passage(pid), negatives)
        for name, variant in (
            ("reader-integrated", ReaderVariant.INTEGRATED),
            ("reader-baseline", ReaderVariant.DPR_BASELINE),
        ):
            model = ReaderModel(
                ReaderConfig(variant=variant, dim=8, max_seq=48, query_budget=24,
                             stride=16, hidden=6, seed=seed),
                vocab,
            )

            def f_reader(model=model):
                model.store.zero_grads()
                loss, _ = reader_loss(example, model, tokenizer)
                return loss

            worst[name] = max(
                worst[name], grad_check(f_reader, model.store, probe_count, seed=seed)
            )
    return worst


if __name__ == "__main__":
    main()
