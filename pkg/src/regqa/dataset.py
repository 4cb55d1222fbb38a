"""Multihop QA dataset construction: clustering, sampling, validation.

The pipeline embeds context units, l2-normalizes the vectors, clusters
them with spherical K-means, takes the members nearest each centroid as
representative contexts, and samples h-context tuples under two
constraints: all titles within a tuple distinct, and pairwise tuple
overlap |Ta ∩ Tb| / h bounded by tau. A generator turns each tuple into
a QA record with extractive evidence spans and explicit reasoning, which
a structural validator re-checks. Finally records are split into train
and test stratified by hop count.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from regqa.corpus import ContextTriple
from regqa.errors import GeneratorFailure, InfeasibleConstraints, InvalidK, ZeroVector

logger = logging.getLogger(__name__)

#: attempts per requested tuple before the sampler declares collapse
REJECTION_BUDGET_FACTOR = 50


# ---------------------------------------------------------------------------
# Embedding normalization and clustering
# ---------------------------------------------------------------------------

def normalize_embeddings(vectors: np.ndarray) -> np.ndarray:
    """Scale every row to unit l2 norm, preserving direction."""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("cannot normalize a zero vector")
    return vectors / norms


@dataclass
class Cluster:
    """One K-means cluster over context embeddings."""

    members: list  # context ids (or indices when no ids were given)
    member_indices: list[int]
    centroid: np.ndarray
    inertia: float


def _kmeanspp_init(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared distance."""
    n = len(vectors)
    centroids = np.empty((k, vectors.shape[1]))
    first = rng.integers(n)
    centroids[0] = vectors[first]
    closest = np.sum((vectors - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centroids[i] = vectors[idx]
        closest = np.minimum(closest, np.sum((vectors - centroids[i]) ** 2, axis=1))
    return centroids


def spherical_kmeans(
    vectors: np.ndarray,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
    ids: Optional[Sequence] = None,
    return_history: bool = False,
):
    """K-means over unit-normalized vectors (spherical K-means).

    Euclidean assignment on unit vectors orders identically to cosine.
    Empty clusters are reseeded from the point farthest from its
    centroid. Deterministic for a fixed seed. When ``return_history`` is
    set, also returns the per-iteration total inertia (non-increasing).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = len(vectors)
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(vectors, k, rng)

    assignment = np.full(n, -1, dtype=int)
    history: list[float] = []
    for _ in range(max_iters):
        dists = np.linalg.norm(vectors[:, None, :] - centroids[None, :, :], axis=2)
        new_assignment = dists.argmin(axis=1)

        # reseed empty clusters from the globally farthest point
        for c in range(k):
            if not np.any(new_assignment == c):
                farthest = dists[np.arange(n), new_assignment].argmax()
                centroids[c] = vectors[farthest]
                new_assignment[farthest] = c

        history.append(float(np.sum(
            np.linalg.norm(vectors - centroids[new_assignment], axis=1) ** 2
        )))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(k):
            mask = assignment == c
            centroids[c] = vectors[mask].mean(axis=0)

    clusters: list[Cluster] = []
    for c in range(k):
        idx = np.flatnonzero(assignment == c).tolist()
        centroid = vectors[idx].mean(axis=0)
        inertia = float(np.sum(np.linalg.norm(vectors[idx] - centroid, axis=1) ** 2))
        members = [ids[i] for i in idx] if ids is not None else list(idx)
        clusters.append(
            Cluster(members=members, member_indices=idx, centroid=centroid, inertia=inertia)
        )
    if return_history:
        return clusters, history
    return clusters


def select_representatives(cluster: Cluster, m: int, vectors: np.ndarray) -> list:
    """The min(m, |cluster|) members nearest the centroid, ties by member id."""
    if m < 1:
        raise ValueError("m must be >= 1")
    dists = [
        (float(np.linalg.norm(np.asarray(vectors[i], dtype=np.float64) - cluster.centroid)), member)
        for i, member in zip(cluster.member_indices, cluster.members)
    ]
    dists.sort(key=lambda t: (t[0], str(t[1])))
    return [member for _, member in dists[:m]]


def default_cluster_count(n_contexts: int) -> int:
    """Default K: ceil(sqrt(N/2)), at least 1."""
    return max(1, int(np.ceil(np.sqrt(n_contexts / 2))))


# ---------------------------------------------------------------------------
# Tuple sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    hop: int
    tau: float
    count: int
    seed: int
    representatives_per_cluster: int = 5

    def __post_init__(self):
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class TupleSample:
    contexts: tuple[str, ...]
    hop: int

    def __post_init__(self):
        if len(self.contexts) != self.hop:
            raise ValueError("tuple size must equal hop count")


def sample_tuples(reps: Sequence[ContextTriple], config: SamplerConfig) -> list[TupleSample]:
    """Rejection-sample up to ``count`` tuples under both constraints.

    A candidate is rejected when two of its contexts share a document
    title, or when its overlap with any accepted tuple exceeds tau.
    Sampling is seeded and deterministic; when the rejection budget
    (50x count) is exhausted the sampler stops early with a warning.
    """
    titles = {r.id: r.title for r in reps}
    if len(set(titles.values())) < config.hop:
        raise InfeasibleConstraints(
            f"need >= {config.hop} distinct titles, have {len(set(titles.values()))}"
        )

    rng = np.random.default_rng(config.seed)
    ids = sorted(titles)
    accepted: list[TupleSample] = []
    accepted_sets: list[set[str]] = []
    attempts_left = REJECTION_BUDGET_FACTOR * config.count

    while len(accepted) < config.count and attempts_left > 0:
        attempts_left -= 1
        picked = tuple(rng.choice(ids, size=config.hop, replace=False))
        if len({titles[c] for c in picked}) < config.hop:
            continue
        picked_set = set(picked)
        if any(len(picked_set & prev) / config.hop > config.tau for prev in accepted_sets):
            continue
        accepted.append(TupleSample(contexts=picked, hop=config.hop))
        accepted_sets.append(picked_set)

    if len(accepted) < config.count:
        logger.warning(
            "tuple sampling collapsed: %d/%d accepted within budget",
            len(accepted),
            config.count,
        )
    return accepted


# ---------------------------------------------------------------------------
# QA record generation and validation
# ---------------------------------------------------------------------------

@dataclass
class QARecord:
    query: str
    answer: str
    number_of_hops: int
    context_ids: list[str]
    evidence: dict[str, str]  # "context_1" -> extractive span
    reasoning: str

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "answer": self.answer,
            "number_of_hops": self.number_of_hops,
            "context_ids": list(self.context_ids),
            "evidence": dict(self.evidence),
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QARecord":
        return cls(
            query=obj["query"],
            answer=obj["answer"],
            number_of_hops=obj["number_of_hops"],
            context_ids=list(obj["context_ids"]),
            evidence=dict(obj["evidence"]),
            reasoning=obj["reasoning"],
        )


class QAGenerator(Protocol):
    def generate(self, sample: TupleSample, contexts: Sequence[ContextTriple]) -> QARecord:
        ...


class TemplateQAGenerator:
    """Deterministic generator used in tests and offline runs.

    Evidence spans are prefixes of the context texts, so extractiveness
    holds by construction; the reasoning names every context label.
    """

    def __init__(self, span_tokens: int = 12):
        self.span_tokens = span_tokens

    def generate(self, sample: TupleSample, contexts: Sequence[ContextTriple]) -> QARecord:
        by_id = {c.id: c for c in contexts}
        try:
            ordered = [by_id[cid] for cid in sample.contexts]
        except KeyError as exc:
            raise GeneratorFailure(f"context missing for tuple: {exc}") from exc

        labels = [f"context_{i}" for i in range(1, sample.hop + 1)]
        evidence: dict[str, str] = {}
        for label, ctx in zip(labels, ordered):
            tokens = ctx.text.split()
            span = " ".join(tokens[: self.span_tokens])
            if not span:
                raise GeneratorFailure(f"empty context text: {ctx.id}")
            evidence[label] = span

        titles = "; ".join(ctx.title for ctx in ordered)
        query = (
            f"Những quy định nào liên quan giữa các văn bản: {titles}? "
            f"(tổng hợp {sample.hop} nguồn)"
        )
        answer = " ".join(
            f"({i}) {span}" for i, span in enumerate(evidence.values(), start=1)
        )
        reasoning = "Câu trả lời tổng hợp từ " + ", ".join(
            f"{label} ({ctx.id})" for label, ctx in zip(labels, ordered)
        ) + "."
        return QARecord(
            query=query,
            answer=answer,
            number_of_hops=sample.hop,
            context_ids=list(sample.contexts),
            evidence=evidence,
            reasoning=reasoning,
        )


def generate_qa(
    sample: TupleSample,
    contexts: Sequence[ContextTriple],
    generator: Optional[QAGenerator] = None,
) -> QARecord:
    """Produce one QA record for a sampled tuple via the given generator."""
    generator = generator or TemplateQAGenerator()
    record = generator.generate(sample, contexts)
    if record.number_of_hops != sample.hop or list(record.context_ids) != list(sample.contexts):
        raise GeneratorFailure("generator changed hop count or context ids")
    return record


REQUIRED_FIELDS = ("query", "answer", "number_of_hops", "context_ids", "evidence", "reasoning")


def validate_record(record: QARecord, corpus: dict[str, ContextTriple]) -> list[str]:
    """Structural validation; returns the violated checks (empty = pass)."""
    violations: list[str] = []
    if not record.query:
        violations.append("query-empty")
    if not record.answer:
        violations.append("answer-empty")
    if len(record.context_ids) != record.number_of_hops:
        violations.append("hop-evidence-mismatch")
    for cid in record.context_ids:
        if cid not in corpus:
            violations.append(f"unknown-context:{cid}")

    labels = [f"context_{i}" for i in range(1, record.number_of_hops + 1)]
    if sorted(record.evidence) != sorted(labels[: len(record.evidence)]) or len(
        record.evidence
    ) != record.number_of_hops:
        violations.append("evidence-label-mismatch")
    for label, span in record.evidence.items():
        try:
            idx = int(label.rsplit("_", 1)[1]) - 1
        except (IndexError, ValueError):
            violations.append(f"bad-evidence-label:{label}")
            continue
        if not 0 <= idx < len(record.context_ids):
            continue
        cid = record.context_ids[idx]
        ctx = corpus.get(cid)
        if ctx is not None and span not in ctx.text:
            violations.append("evidence-not-extractive")

    if not record.reasoning:
        violations.append("reasoning-empty")
    else:
        for label in labels:
            if label not in record.reasoning:
                violations.append(f"reasoning-missing-label:{label}")
    return violations


# ---------------------------------------------------------------------------
# Splitting and serialization
# ---------------------------------------------------------------------------

def split_dataset(
    records: Sequence[QARecord], test_fraction: float, seed: int
) -> tuple[list[QARecord], list[QARecord]]:
    """Disjoint, exhaustive train/test split stratified by hop count."""
    if not records:
        raise ValueError("records must be non-empty")
    if not 0 <= test_fraction <= 1:
        raise ValueError("test_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    by_hop: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        by_hop.setdefault(rec.number_of_hops, []).append(i)

    test_idx: set[int] = set()
    for hop in sorted(by_hop):
        idx = by_hop[hop]
        n_test = int(round(len(idx) * test_fraction))
        order = rng.permutation(len(idx))
        test_idx.update(idx[j] for j in order[:n_test])

    train = [records[i] for i in range(len(records)) if i not in test_idx]
    test = [records[i] for i in range(len(records)) if i in test_idx]
    return train, test


def save_records(records: Iterable[QARecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")


def load_records(path: str | Path) -> list[QARecord]:
    """Load dataset records from JSONL, or from a JSON array file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").strip()
    records: list[QARecord] = []
    if text.startswith("["):
        for obj in json.loads(text):
            records.append(QARecord.from_json(obj))
        return records
    for line in text.splitlines():
        line = line.strip()
        if line:
            records.append(QARecord.from_json(json.loads(line)))
    return records
