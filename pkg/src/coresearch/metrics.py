"""Ranking and span-extraction metrics with run-file IO.

Rankings are macro-averaged per query: MRR@10, mAP@{10,50} (AP@k with
denominator min(|gold|, k)), and recall at {10, 50, 100, 500}. Span quality
uses exact match and token-bag F1 after answer normalization (lowercase,
punctuation stripped, articles removed, whitespace collapsed), and a
prediction only counts when its token span intersects the gold span — the
same surface form elsewhere in the passage scores zero.
"""

from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusSplit, MentionSpan
from .errors import FormatError, ParseError
from .textproc import Tokenizer

logger = logging.getLogger(__name__)

RECALL_KS = (10, 50, 100, 500)

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass
class RankedResult:
    passage_id: str
    span: MentionSpan | None = None
    score: float | None = None
    select_prob: float | None = None
    span_text: str | None = None


Run = dict[str, list[RankedResult]]


def mrr_at_k(run: dict[str, list[str]], gold: dict[str, set[str]], k: int = 10) -> float:
    """Mean reciprocal rank of the first relevant result within the top k."""
    total, n = 0.0, 0
    for qid in sorted(gold):
        if not gold[qid]:
            logger.warning("query %s has an empty gold set; excluded from MRR", qid)
            continue
        n += 1
        ranking = run.get(qid)
        if ranking is None:
            logger.warning("query %s missing from run; counted as 0", qid)
            continue
        for rank, pid in enumerate(ranking[:k], start=1):
            if pid in gold[qid]:
                total += 1.0 / rank
                break
    return total / n if n else 0.0


def map_at_k(run: dict[str, list[str]], gold: dict[str, set[str]], k: int) -> float:
    """Mean of AP@k = sum of precision-at-relevant-ranks / min(|gold|, k)."""
    total, n = 0.0, 0
    for qid in sorted(gold):
        if not gold[qid]:
            logger.warning("query %s has an empty gold set; excluded from mAP", qid)
            continue
        n += 1
        ranking = run.get(qid)
        if ranking is None:
            logger.warning("query %s missing from run; counted as 0", qid)
            continue
        hits = 0
        ap = 0.0
        for rank, pid in enumerate(ranking[:k], start=1):
            if pid in gold[qid]:
                hits += 1
                ap += hits / rank
        total += ap / min(len(gold[qid]), k)
    return total / n if n else 0.0


def recall_at_k(run: dict[str, list[str]], gold: dict[str, set[str]], k: int) -> float:
    total, n = 0.0, 0
    for qid in sorted(gold):
        if not gold[qid]:
            logger.warning("query %s has an empty gold set; excluded from recall", qid)
            continue
        n += 1
        ranking = run.get(qid)
        if ranking is None:
            logger.warning("query %s missing from run; counted as 0", qid)
            continue
        total += len(gold[qid].intersection(ranking[:k])) / len(gold[qid])
    return total / n if n else 0.0


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def em_f1(
    pred_text: str,
    gold_text: str,
    pred_span: MentionSpan | None,
    gold_span: MentionSpan,
) -> tuple[int, float]:
    """(exact match, token F1); both zero unless the spans intersect."""
    if pred_span is None:
        return 0, 0.0
    if pred_span.end < gold_span.start or gold_span.end < pred_span.start:
        return 0, 0.0
    pred_norm = normalize_answer(pred_text)
    gold_norm = normalize_answer(gold_text)
    em = int(pred_norm == gold_norm)
    pred_tokens = pred_norm.split()
    gold_tokens = gold_norm.split()
    if not pred_tokens or not gold_tokens:
        return em, float(pred_tokens == gold_tokens)
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return em, 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return em, 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Aggregate reports
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    mrr10: float
    map10: float
    map50: float
    r10: float
    r50: float
    r100: float
    r500: float
    em: float
    f1: float
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    notes: str = (
        "AP@k denominator = min(|gold|, k); macro averages over queries; "
        "EM/F1 averaged over gold-positive passages present in each ranking, "
        "queries with none retrieved are excluded from EM/F1."
    )

    def to_dict(self) -> dict:
        return {
            "notes": self.notes,
            "metrics": {
                "mrr10": self.mrr10,
                "map10": self.map10,
                "map50": self.map50,
                "r10": self.r10,
                "r50": self.r50,
                "r100": self.r100,
                "r500": self.r500,
                "em": self.em,
                "f1": self.f1,
            },
            "per_query": self.per_query,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


_TABLE_COLUMNS = (
    ("MRR@10", "mrr10"),
    ("mAP@10", "map10"),
    ("mAP@50", "map50"),
    ("R@10", "r10"),
    ("R@50", "r50"),
    ("R@100", "r100"),
    ("R@500", "r500"),
    ("EM", "em"),
    ("F1", "f1"),
)


def render_table(report: MetricReport, label: str = "run") -> str:
    """Aligned plain-text metric table (values in percent)."""
    headers = ["system"] + [name for name, _ in _TABLE_COLUMNS]
    row = [label] + [f"{getattr(report, attr) * 100:.2f}" for _, attr in _TABLE_COLUMNS]
    widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
    sep = "-+-".join("-" * w for w in widths)
    head = " | ".join(h.ljust(w) for h, w in zip(headers, widths))
    body = " | ".join(v.ljust(w) for v, w in zip(row, widths))
    return f"{head}\n{sep}\n{body}\n"


def evaluate_run(run: Run, split: CorpusSplit, tokenizer: Tokenizer) -> MetricReport:
    """Score a ranked (and optionally span-annotated) run against a split."""
    gold = {qid: split.positives_for(qid) for qid in split.queries}
    id_run = {qid: [r.passage_id for r in results] for qid, results in run.items()}

    per_query: dict[str, dict[str, float]] = {}
    em_values: list[float] = []
    f1_values: list[float] = []
    for qid in sorted(gold):
        entry: dict[str, float] = {}
        single = {qid: id_run.get(qid, [])}
        sgold = {qid: gold[qid]}
        entry["mrr10"] = mrr_at_k(single, sgold, 10)
        entry["map10"] = map_at_k(single, sgold, 10)
        entry["map50"] = map_at_k(single, sgold, 50)
        for k in RECALL_KS:
            entry[f"r{k}"] = recall_at_k(single, sgold, k)
        pair_scores: list[tuple[int, float]] = []
        for result in run.get(qid, []):
            if result.passage_id not in gold[qid]:
                continue
            passage = split.passage(result.passage_id)
            tokens = passage.tokens(tokenizer)
            pred_text = (
                " ".join(tokens[result.span.start : result.span.end + 1])
                if result.span is not None
                else ""
            )
            pair_scores.append(
                em_f1(pred_text, passage.mention_text(tokenizer), result.span, passage.mention)
            )
        if pair_scores:
            entry["em"] = sum(e for e, _ in pair_scores) / len(pair_scores)
            entry["f1"] = sum(f for _, f in pair_scores) / len(pair_scores)
            em_values.append(entry["em"])
            f1_values.append(entry["f1"])
        per_query[qid] = entry

    full_gold = {qid: gold[qid] for qid in gold}
    return MetricReport(
        mrr10=mrr_at_k(id_run, full_gold, 10),
        map10=map_at_k(id_run, full_gold, 10),
        map50=map_at_k(id_run, full_gold, 50),
        r10=recall_at_k(id_run, full_gold, 10),
        r50=recall_at_k(id_run, full_gold, 50),
        r100=recall_at_k(id_run, full_gold, 100),
        r500=recall_at_k(id_run, full_gold, 500),
        em=sum(em_values) / len(em_values) if em_values else 0.0,
        f1=sum(f1_values) / len(f1_values) if f1_values else 0.0,
        per_query=per_query,
    )


# ---------------------------------------------------------------------------
# Run files
# ---------------------------------------------------------------------------


def _span_to_dict(span: MentionSpan | None) -> dict | None:
    return None if span is None else {"start": span.start, "end": span.end}


def save_run(run: Run, path: str | Path) -> None:
    """Compact run format: one line per query with its full ranking."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run):
            rec = {
                "query_id": qid,
                "ranking": [
                    {
                        "passage_id": r.passage_id,
                        "score": r.score,
                        "span": _span_to_dict(r.span),
                    }
                    for r in run[qid]
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def save_rerank_run(run: Run, path: str | Path) -> None:
    """Rich rerank format: one line per (query, rank) with scores and text."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run):
            for rank, r in enumerate(run[qid], start=1):
                rec = {
                    "query_id": qid,
                    "rank": rank,
                    "passage_id": r.passage_id,
                    "score": r.score,
                    "select_prob": r.select_prob,
                    "span_start": r.span.start if r.span else None,
                    "span_end": r.span.end if r.span else None,
                    "span_text": r.span_text,
                }
                fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_run(path: str | Path) -> Run:
    """Read either run format (compact per-query or rich per-rank rows)."""
    compact: Run = {}
    rich: dict[str, list[tuple[int, RankedResult]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=line_no) from exc
            if "ranking" in rec:
                results = []
                for item in rec["ranking"]:
                    span = item.get("span")
                    results.append(
                        RankedResult(
                            passage_id=item["passage_id"],
                            span=MentionSpan(span["start"], span["end"]) if span else None,
                            score=item.get("score"),
                        )
                    )
                compact[rec["query_id"]] = results
            elif "rank" in rec:
                span = (
                    MentionSpan(rec["span_start"], rec["span_end"])
                    if rec.get("span_start") is not None
                    else None
                )
                rich.setdefault(rec["query_id"], []).append(
                    (
                        rec["rank"],
                        RankedResult(
                            passage_id=rec["passage_id"],
                            span=span,
                            score=rec.get("score"),
                            select_prob=rec.get("select_prob"),
                            span_text=rec.get("span_text"),
                        ),
                    )
                )
            else:
                raise ParseError("line is neither a compact nor a rich run record", line=line_no)
    if compact and rich:
        raise FormatError("run file mixes compact and rich record formats")
    if rich:
        return {qid: [r for _, r in sorted(rows, key=lambda t: t[0])] for qid, rows in rich.items()}
    return compact
