"""Synthetic regulatory corpora for tests, demos, and ablation studies.

The generator builds amendment chains where the legally applicable
(terminal) provision is lexically disjoint from the query while the
superseded provision matches it word for word. Flat lexical or hashed
semantic retrieval therefore lands on the outdated text, and only
validity tracing reaches the gold terminal, which is exactly the
behaviour the graph-aware pipeline is meant to add.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Optional

import numpy as np

from regqa.corpus import DocMeta, extract_relation_mentions, parse_document
from regqa.graph import RegGraph


@dataclass(frozen=True)
class SyntheticQuery:
    """One probe query with its gold terminal node and gold answer text."""

    query: str
    gold_terminal: str
    gold_answer: str
    chain_head: str  # node id of the superseded provision the query matches


@dataclass
class SyntheticCorpus:
    graph: RegGraph
    queries: list[SyntheticQuery]
    doc_count: int


def _topic_tokens(i: int, rng: np.random.Generator) -> list[str]:
    # pronounceable pseudo-words, unique per chain, stable for a fixed seed
    syllables = ["ka", "mo", "tri", "vel", "sun", "bo", "lan", "phi", "dur", "xe"]
    out = []
    for j in range(3):
        parts = rng.integers(0, len(syllables), size=3)
        out.append("".join(syllables[p] for p in parts) + f"{i}{j}")
    return out


def generate_synthetic_corpus(
    n_chains: int = 30,
    seed: int = 0,
    with_references: bool = True,
) -> SyntheticCorpus:
    """Build a corpus of amendment-chain document pairs.

    Per chain i: an old document whose article 1 carries the query topic
    vocabulary, and an amending document whose article 1 amends it with
    entirely different vocabulary (the gold answer). Optionally every
    third old document also refers to a shared definitions document.
    """
    rng = np.random.default_rng(seed)
    graph = RegGraph()
    queries: list[SyntheticQuery] = []
    doc_count = 0

    def ingest(doc_id: str, title: str, text: str, promulgated: date) -> None:
        nonlocal doc_count
        meta = DocMeta(
            doc_id=doc_id, title=title, promulgated=promulgated, authority="BYT",
            status="in_force",
        )
        units = parse_document(text, meta)
        mentions = [m for u in units for m in extract_relation_mentions(u)]
        graph.ingest_document(units, mentions, meta=meta)
        doc_count += 1

    if with_references:
        ingest(
            "01/2019/TT-BYT",
            "Thông tư định nghĩa chung",
            "Điều 1. Giải thích các thuật ngữ dùng chung cho hệ thống văn bản.",
            date(2019, 1, 1),
        )

    for i in range(n_chains):
        topic = _topic_tokens(i, rng)
        gold = _topic_tokens(1000 + i, rng)
        old_id = f"{i + 10}/2020/TT-BYT"
        new_id = f"{i + 10}/2023/TT-BYT"

        old_text = f"Điều 1. Tiêu chuẩn {topic[0]} {topic[1]} {topic[2]} áp dụng."
        if with_references and i % 3 == 0:
            old_text += "\nĐiều 2. Căn cứ Điều 1 Thông tư 01/2019/TT-BYT."
        ingest(old_id, f"Thông tư gốc {i}", old_text, date(2020, 1, 1))

        new_text = (
            f"Điều 1. Sửa đổi Điều 1 Thông tư {old_id} thành: "
            f"{gold[0]} {gold[1]} {gold[2]}."
        )
        ingest(new_id, f"Thông tư cập nhật {i}", new_text, date(2023, 6, 1))

        queries.append(
            SyntheticQuery(
                query=f"Quy định tiêu chuẩn {topic[0]} {topic[1]} {topic[2]} là gì?",
                gold_terminal=f"{new_id}::Đ1",
                gold_answer=f"{gold[0]} {gold[1]} {gold[2]}",
                chain_head=f"{old_id}::Đ1",
            )
        )

    return SyntheticCorpus(graph=graph, queries=queries, doc_count=doc_count)
