"""Corpus construction: loaders, destructor filtering, splits, synthesis."""

from __future__ import annotations

import json

import pytest

from conftest import make_passage
from coresearch.corpus import ClusterType, CoreferenceCluster, MentionSpan, Passage
from coresearch.databuild import (
    BuildConfig,
    ClusterRecord,
    RawParagraph,
    SynthConfig,
    _largest_remainder,
    build_splits,
    classify_cluster_type,
    filter_destructors,
    generate_synthetic_corpus,
    load_cluster_records,
    load_gazetteer,
    load_raw_paragraphs,
    wec_record_to_passage,
)
from coresearch.errors import ConfigError, ParseError, ValidationError


class TestLoaders:
    def test_cluster_records_round_trip(self, tmp_path):
        path = tmp_path / "clusters.jsonl"
        rec = {
            "cluster_id": "evt-1",
            "passages": [
                {"id": "p1", "text": "The quake struck .", "mention": {"start": 1, "end": 1}},
                {"id": "p2", "text": "A quake hit town .", "mention": {"start": 1, "end": 1}},
            ],
        }
        path.write_text(json.dumps(rec) + "\n\n")
        records = load_cluster_records(path)
        assert len(records) == 1
        cluster = records[0]
        assert cluster.cluster_id == "evt-1"
        assert [p.id for p in cluster.passages] == ["p1", "p2"]
        assert cluster.passages[0].mention == MentionSpan(1, 1)
        assert all(p.cluster_id == "evt-1" for p in cluster.passages)

    def test_cluster_records_bad_json_line_number(self, tmp_path):
        path = tmp_path / "clusters.jsonl"
        path.write_text('{"cluster_id":"a","passages":[]}\n{oops\n')
        with pytest.raises(ParseError) as exc:
            load_cluster_records(path)
        assert exc.value.line == 2

    def test_cluster_records_missing_field(self, tmp_path):
        path = tmp_path / "clusters.jsonl"
        path.write_text('{"cluster_id":"a","passages":[{"id":"p1","text":"x"}]}\n')
        with pytest.raises(ParseError):
            load_cluster_records(path)

    def test_raw_paragraphs(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text(
            '{"text":"Some filler text .","links":["evt-1"],"id":"r1"}\n'
            '{"text":"No links here ."}\n'
        )
        paras = load_raw_paragraphs(path)
        assert paras[0] == RawParagraph(text="Some filler text .", links=("evt-1",), id="r1")
        assert paras[1].links == () and paras[1].id is None

    def test_raw_paragraphs_require_text(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text('{"links":[]}\n')
        with pytest.raises(ParseError, match="text"):
            load_raw_paragraphs(path)


class TestWecConversion:
    def test_simple_record(self):
        record = {
            "mention_id": 42,
            "coref_chain": 7,
            "mention_context": ["The", "2010", "Yushu", "earthquake", "struck"],
            "tokens_number": [3],
        }
        passage = wec_record_to_passage(record)
        assert passage.id == "42"
        assert passage.cluster_id == "7"
        assert passage.text == "The 2010 Yushu earthquake struck"
        assert passage.mention == MentionSpan(3, 3)

    def test_context_token_that_splits_further(self, tokenizer):
        record = {
            "mention_id": "m1",
            "coref_chain": "c1",
            "mention_context": ["U.S.", "plane-crash", "report"],
            "tokens_number": [1],
        }
        passage = wec_record_to_passage(record)
        toks = passage.tokens(tokenizer)
        span = passage.mention
        assert toks[span.start : span.end + 1] == ("plane", "-", "crash")

    def test_multi_token_mention(self):
        record = {
            "mention_id": "m2",
            "coref_chain": "c1",
            "mention_context": ["the", "royal", "wedding", "of", "2011"],
            "tokens_number": [1, 2],
        }
        passage = wec_record_to_passage(record)
        assert passage.mention == MentionSpan(1, 2)

    def test_position_outside_context(self):
        record = {
            "mention_id": "m3",
            "coref_chain": "c1",
            "mention_context": ["short"],
            "tokens_number": [4],
        }
        with pytest.raises(ValidationError, match="outside"):
            wec_record_to_passage(record)

    def test_empty_context(self):
        record = {
            "mention_id": "m4", "coref_chain": "c1",
            "mention_context": [], "tokens_number": [],
        }
        with pytest.raises(ValidationError, match="empty"):
            wec_record_to_passage(record)


class TestFilterDestructors:
    def _clusters(self):
        return [
            ClusterRecord(
                "evt-1",
                (
                    make_passage("p1", "a b", (0, 0), "evt-1"),
                    make_passage("p2", "a b", (0, 0), "evt-1"),
                ),
            )
        ]

    def test_drops_linked_paragraphs(self):
        paragraphs = [RawParagraph(text=f"text {i}", id=f"r{i}") for i in range(100)]
        for i in range(4):
            paragraphs[i] = RawParagraph(text=f"text {i}", links=("evt-1",), id=f"r{i}")
        for i in range(4, 7):
            paragraphs[i] = RawParagraph(text=f"text {i}", links=("p2", "other"), id=f"r{i}")
        survivors = filter_destructors(paragraphs, self._clusters())
        assert len(survivors) == 93
        assert all(p.is_destructor and p.cluster_id is None for p in survivors)
        assert {p.id for p in survivors} == {f"r{i}" for i in range(7, 100)}

    def test_links_to_unknown_targets_survive(self):
        paragraphs = [RawParagraph(text="x", links=("elsewhere",), id="r0")]
        assert len(filter_destructors(paragraphs, self._clusters())) == 1

    def test_missing_ids_get_sequential_names(self):
        paragraphs = [RawParagraph(text="x"), RawParagraph(text="y")]
        survivors = filter_destructors(paragraphs, self._clusters())
        assert [p.id for p in survivors] == ["d000000", "d000001"]


class TestLargestRemainder:
    def test_exact_fractions(self):
        assert _largest_remainder(10, [0.6, 0.2, 0.2]) == [6, 2, 2]

    def test_leftovers_go_to_largest_remainders(self):
        assert _largest_remainder(7, [0.5, 0.25, 0.25]) == [3, 2, 2]

    def test_ties_break_to_lower_index(self):
        assert _largest_remainder(5, [0.5, 0.5]) == [3, 2]

    def test_sums_are_preserved(self):
        for total in (0, 1, 13, 97):
            counts = _largest_remainder(total, [0.61, 0.29, 0.1])
            assert sum(counts) == total


def _synthetic_clusters(n, size=2):
    records = []
    for ci in range(n):
        members = tuple(
            make_passage(f"c{ci}-p{mi}", f"token{ci} event .", (1, 1), f"cl{ci}")
            for mi in range(size)
        )
        records.append(ClusterRecord(f"cl{ci}", members))
    return records


class TestBuildSplits:
    def _cfg(self, **kw):
        defaults = dict(
            split_cluster_counts={"train": 6, "dev": 2, "test": 2}, seed=0
        )
        defaults.update(kw)
        return BuildConfig(**defaults)

    def test_partition_is_disjoint_and_complete(self):
        clusters = _synthetic_clusters(10)
        destructors = [make_passage(f"d{i}", f"noise {i}", is_destructor=True) for i in range(5)]
        splits = build_splits(clusters, destructors, self._cfg())
        assert set(splits) == {"train", "dev", "test"}
        cluster_sets = [set(s.clusters) for s in splits.values()]
        assert sum(len(cs) for cs in cluster_sets) == 10
        assert len(set.union(*cluster_sets)) == 10
        assert len(splits["train"].clusters) == 6
        assert len(splits["dev"].clusters) == 2
        # Destructors apportioned 3/1/1 and disjoint.
        d_counts = [
            sum(1 for p in s.passages.values() if p.is_destructor) for s in splits.values()
        ]
        assert sorted(d_counts, reverse=True) == [3, 1, 1]

    def test_same_seed_reproduces(self):
        clusters = _synthetic_clusters(10)
        a = build_splits(clusters, [], self._cfg(seed=5))
        b = build_splits(clusters, [], self._cfg(seed=5))
        assert {n: sorted(s.clusters) for n, s in a.items()} == {
            n: sorted(s.clusters) for n, s in b.items()
        }

    def test_seed_changes_assignment(self):
        clusters = _synthetic_clusters(30)
        cfg_a = BuildConfig(split_cluster_counts={"train": 20, "dev": 5, "test": 5}, seed=0)
        cfg_b = BuildConfig(split_cluster_counts={"train": 20, "dev": 5, "test": 5}, seed=1)
        a = build_splits(clusters, [], cfg_a)
        b = build_splits(clusters, [], cfg_b)
        assert sorted(a["dev"].clusters) != sorted(b["dev"].clusters)

    def test_counts_must_sum_to_available(self):
        with pytest.raises(ConfigError, match="sum"):
            build_splits(_synthetic_clusters(9), [], self._cfg())

    def test_single_member_cluster_rejected(self):
        clusters = _synthetic_clusters(9) + [
            ClusterRecord("lonely", (make_passage("solo", "a b", (0, 0), "lonely"),))
        ]
        with pytest.raises(ValidationError, match="lonely"):
            build_splits(clusters, [], self._cfg())

    def test_duplicate_cluster_id_rejected(self):
        clusters = _synthetic_clusters(10)
        clusters[3] = ClusterRecord("cl2", clusters[3].passages)
        with pytest.raises(ValidationError, match="cl2"):
            build_splits(clusters, [], self._cfg())

    def test_config_validation(self):
        with pytest.raises(ConfigError, match="lacks"):
            BuildConfig(split_cluster_counts={"train": 5, "dev": 5})
        with pytest.raises(ConfigError, match="non-negative"):
            BuildConfig(split_cluster_counts={"train": -1, "dev": 1, "test": 0})
        with pytest.raises(ConfigError, match="min_cluster_size"):
            BuildConfig(
                split_cluster_counts={"train": 1, "dev": 0, "test": 0}, min_cluster_size=1
            )


class TestClassifyClusterType:
    def _cluster(self, texts_and_spans):
        passages = {}
        ids = []
        for i, (text, span) in enumerate(texts_and_spans):
            pid = f"p{i}"
            ids.append(pid)
            passages[pid] = make_passage(pid, text, span, "c1")
        return CoreferenceCluster("c1", frozenset(ids)), passages

    def test_year_in_every_mention_is_type1(self, tokenizer):
        cluster, passages = self._cluster(
            [
                ("The 2010 Yushu earthquake struck .", (1, 3)),
                ("Rescuers recalled the 2010 earthquake .", (3, 4)),
            ]
        )
        assert classify_cluster_type(cluster, passages, tokenizer) is ClusterType.TYPE1

    def test_month_counts_as_time_argument(self, tokenizer):
        cluster, passages = self._cluster(
            [
                ("The April uprising began .", (1, 2)),
                ("Historians studied the April uprising .", (3, 4)),
            ]
        )
        assert classify_cluster_type(cluster, passages, tokenizer) is ClusterType.TYPE1

    def test_gazetteer_location_is_type1(self, tokenizer):
        cluster, passages = self._cluster(
            [
                ("The Dahab bombing shocked tourists .", (1, 2)),
                ("Memorials followed the Dahab bombing .", (3, 4)),
            ]
        )
        gaz = frozenset({"dahab"})
        assert (
            classify_cluster_type(cluster, passages, tokenizer, gazetteer=gaz)
            is ClusterType.TYPE1
        )
        # Without the gazetteer entry the same cluster is argument-free.
        assert classify_cluster_type(cluster, passages, tokenizer) is ClusterType.TYPE2

    def test_one_bare_mention_makes_type2(self, tokenizer):
        cluster, passages = self._cluster(
            [
                ("The 2010 Yushu earthquake struck .", (1, 3)),
                ("Rescuers recalled the earthquake that hit Yushu .", (3, 3)),
            ]
        )
        assert classify_cluster_type(cluster, passages, tokenizer) is ClusterType.TYPE2

    def test_load_gazetteer(self, tmp_path):
        path = tmp_path / "gaz.txt"
        path.write_text("Dahab\nYushu\n\n bam \n")
        assert load_gazetteer(path) == frozenset({"dahab", "yushu", "bam"})


class TestSynthConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError, match="n_clusters"):
            SynthConfig(n_clusters=0)
        with pytest.raises(ConfigError, match="cluster_size_range"):
            SynthConfig(n_clusters=5, cluster_size_range=(1, 3))
        with pytest.raises(ConfigError, match="type2_fraction"):
            SynthConfig(n_clusters=5, type2_fraction=1.2)
        with pytest.raises(ConfigError, match="destructor_arg_borrow"):
            SynthConfig(n_clusters=5, destructor_arg_borrow=-0.1)
        with pytest.raises(ConfigError, match="sum to 1"):
            SynthConfig(n_clusters=5, split_fractions=(0.5, 0.2, 0.2))
        with pytest.raises(ConfigError, match="need at least"):
            SynthConfig(n_clusters=300, n_locations=200, n_years=400)


def _small_synth(**kw):
    defaults = dict(
        n_clusters=12,
        cluster_size_range=(2, 3),
        n_destructors=6,
        type2_fraction=0.5,
        n_event_types=5,
        n_locations=20,
        n_years=20,
        split_fractions=(0.5, 0.25, 0.25),
        seed=3,
    )
    defaults.update(kw)
    return SynthConfig(**defaults)


def _fingerprint(splits):
    return [
        (name, p.id, p.text, None if p.mention is None else (p.mention.start, p.mention.end),
         p.cluster_id, p.is_destructor)
        for name, split in sorted(splits.items())
        for p in split.passages.values()
    ]


class TestGenerateSyntheticCorpus:
    def test_split_shapes(self):
        splits = generate_synthetic_corpus(_small_synth())
        assert set(splits) == {"train", "dev", "test"}
        assert len(splits["train"].clusters) == 6
        assert len(splits["dev"].clusters) == 3
        assert len(splits["test"].clusters) == 3
        d_counts = {
            name: sum(1 for p in s.passages.values() if p.is_destructor)
            for name, s in splits.items()
        }
        assert d_counts == {"train": 3, "dev": 2, "test": 1}
        for split in splits.values():
            for cluster in split.clusters.values():
                assert len(cluster.passage_ids) >= 2
            for qid in split.queries:
                assert split.positives_for(qid)

    def test_same_seed_is_byte_identical(self):
        a = generate_synthetic_corpus(_small_synth())
        b = generate_synthetic_corpus(_small_synth())
        assert _fingerprint(a) == _fingerprint(b)

    def test_seed_changes_output(self):
        a = generate_synthetic_corpus(_small_synth())
        b = generate_synthetic_corpus(_small_synth(seed=4))
        assert _fingerprint(a) != _fingerprint(b)

    def test_type2_fraction_zero_gives_argument_bearing_mentions(self, tokenizer):
        splits = generate_synthetic_corpus(_small_synth(type2_fraction=0.0))
        for split in splits.values():
            for qid in split.queries:
                passage = split.passage(qid)
                mention = passage.tokens(tokenizer)[
                    passage.mention.start : passage.mention.end + 1
                ]
                assert len(mention) == 3  # year, location, event type
                assert mention[0].isdigit()

    def test_type2_fraction_one_gives_bare_mentions(self, tokenizer):
        splits = generate_synthetic_corpus(_small_synth(type2_fraction=1.0))
        for split in splits.values():
            for qid in split.queries:
                passage = split.passage(qid)
                assert len(passage.mention) == 1

    def test_destructor_arguments_disjoint_from_clusters(self, tokenizer):
        splits = generate_synthetic_corpus(_small_synth(type2_fraction=0.0))
        cluster_args = set()
        destructor_tokens = set()
        for split in splits.values():
            for p in split.passages.values():
                if p.is_destructor:
                    destructor_tokens.update(p.tokens(tokenizer))
                else:
                    toks = p.tokens(tokenizer)
                    year, loc, _ = toks[p.mention.start : p.mention.end + 1]
                    cluster_args.update({year, loc})
        assert not cluster_args & destructor_tokens

    def test_borrowing_reuses_same_split_cluster_arguments(self, tokenizer):
        base = generate_synthetic_corpus(_small_synth(type2_fraction=0.0))
        borrowed = generate_synthetic_corpus(
            _small_synth(type2_fraction=0.0, destructor_arg_borrow=1.0)
        )
        any_borrow = False
        for name, split in borrowed.items():
            args = set()
            for p in split.passages.values():
                if not p.is_destructor:
                    toks = p.tokens(tokenizer)
                    year, loc, _ = toks[p.mention.start : p.mention.end + 1]
                    args.update({year, loc})
            for p in split.passages.values():
                if p.is_destructor and set(p.tokens(tokenizer)) & args:
                    any_borrow = True
        assert any_borrow
        # Annotated passages are untouched by the borrow pass.
        base_annotated = [t for t in _fingerprint(base) if not t[5]]
        borrowed_annotated = [t for t in _fingerprint(borrowed) if not t[5]]
        assert base_annotated == borrowed_annotated
        # Destructor ids and count are stable; only texts change.
        base_ids = [t[1] for t in _fingerprint(base) if t[5]]
        borrowed_ids = [t[1] for t in _fingerprint(borrowed) if t[5]]
        assert base_ids == borrowed_ids

    def test_borrowed_corpus_is_deterministic(self):
        a = generate_synthetic_corpus(_small_synth(destructor_arg_borrow=0.9))
        b = generate_synthetic_corpus(_small_synth(destructor_arg_borrow=0.9))
        assert _fingerprint(a) == _fingerprint(b)
