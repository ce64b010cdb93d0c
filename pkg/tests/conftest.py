"""Shared fixtures and small corpus builders."""

from __future__ import annotations

import numpy as np
import pytest

from coresearch.corpus import CorpusSplit, MentionSpan, Passage
from coresearch.textproc import Tokenizer


@pytest.fixture(scope="session")
def tokenizer() -> Tokenizer:
    return Tokenizer()


def make_passage(
    pid: str,
    text: str,
    mention: tuple[int, int] | None = None,
    cluster_id: str | None = None,
    is_destructor: bool = False,
) -> Passage:
    span = MentionSpan(*mention) if mention is not None else None
    return Passage(
        id=pid, text=text, mention=span, cluster_id=cluster_id, is_destructor=is_destructor
    )


def quake_split(name: str = "train") -> CorpusSplit:
    """Seven hand-written passages over three clusters plus one destructor."""
    passages = [
        make_passage("p1", "The 2010 Yushu earthquake struck Qinghai in April .", (3, 3), "c1"),
        make_passage("p2", "Rescuers recalled the earthquake that hit Yushu in 2010 .", (3, 3), "c1"),
        make_passage("p3", "A quake devastated the Yushu region of Qinghai .", (1, 1), "c1"),
        make_passage("p4", "The 2003 Bam earthquake destroyed an ancient citadel .", (3, 3), "c2"),
        make_passage("p5", "Iran mourned victims of the earthquake that leveled Bam .", (5, 5), "c2"),
        make_passage("p6", "The annual parade drew thousands to the city center .", (2, 2), "c3"),
        make_passage("p7", "Organizers said the parade would return next spring .", (3, 3), "c3"),
        make_passage("dx1", "A committee reviewed stadium funding for next year .", None, None, True),
    ]
    return CorpusSplit(name, passages)


def random_unit(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)
