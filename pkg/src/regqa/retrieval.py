"""Hybrid sparse+dense retrieval over non-placeholder graph nodes.

The sparse channel is Okapi BM25 (k1=1.2, b=0.75) over an inverted index
built from lowercased word tokens. The dense channel stores one
l2-normalized embedding per node and scores queries by inner product
(cosine on unit vectors). Per-query min-max normalization reconciles the
two scales before the convex fusion
``fused = lambda * dense + (1 - lambda) * sparse``.

Two embedding providers ship: a deterministic offline hashed
term-frequency provider (used throughout the tests) and an HTTP provider
for hosted embedding models.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from regqa.errors import CorruptSnapshot, EmptyIndex, ProviderFailure, UnknownNode
from regqa.graph import RegNode

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace-and-punctuation tokenization; no stemming."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return one embedding row per input text, shape (len(texts), dim)."""
        ...


class HashedTfProvider:
    """Deterministic offline embedding: hashed term-frequency buckets.

    Each token is mapped to a bucket by a stable digest; the bucket counts
    form the vector, which is then l2-normalized. Equal texts always map
    to equal vectors, across sessions and machines.
    """

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            for token in tokenize(text):
                out[i, self._bucket(token)] += 1.0
            norm = float(np.linalg.norm(out[i]))
            if norm > 0:
                out[i] /= norm
        return out


class HttpEmbeddingProvider:
    """Remote provider: POST {"texts": [...]} to a configured endpoint.

    The bearer token is read from an environment variable so secrets stay
    out of config files. Calls are retried a bounded number of times
    before raising ProviderFailure.
    """

    def __init__(
        self,
        url: str,
        dim: int,
        token_env: str = "REGQA_EMBED_TOKEN",
        retries: int = 3,
        timeout: float = 30.0,
    ):
        self.url = url
        self.dim = dim
        self.token_env = token_env
        self.retries = retries
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Optional[Exception] = None
        for _ in range(self.retries):
            try:
                resp = httpx.post(
                    self.url,
                    json={"texts": list(texts)},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                vectors = np.asarray(resp.json()["embeddings"], dtype=np.float32)
                if vectors.shape != (len(texts), self.dim):
                    raise ProviderFailure(
                        f"provider returned shape {vectors.shape}, "
                        f"expected ({len(texts)}, {self.dim})"
                    )
                norms = np.linalg.norm(vectors, axis=1, keepdims=True)
                norms[norms == 0] = 1.0
                return vectors / norms
            except ProviderFailure:
                raise
            except Exception as exc:  # noqa: BLE001 - network errors vary
                last_error = exc
        raise ProviderFailure(f"embedding call failed after {self.retries} tries: {last_error}")


# ---------------------------------------------------------------------------
# Configuration and scored results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RetrievalConfig:
    """Fusion weight, seed count and score-normalization mode."""

    fusion_lambda: float = 0.5
    k_seeds: int = 5
    normalization: str = "minmax"  # minmax | none

    def __post_init__(self):
        if not 0.0 <= self.fusion_lambda <= 1.0:
            raise ValueError("fusion_lambda must lie in [0, 1]")
        if self.k_seeds < 1:
            raise ValueError("k_seeds must be >= 1")
        if self.normalization not in ("minmax", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class ScoredNode:
    node_id: str
    sparse: float
    dense: float
    fused: float


def minmax_normalize(scores: dict[str, float]) -> dict[str, float]:
    """Map the per-query channel maximum to 1 and minimum to 0.

    Degenerate channels (max == min) map every candidate to 0 so the
    channel carries no ranking signal.
    """
    if not scores:
        return {}
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        return {k: 0.0 for k in scores}
    return {k: (v - lo) / (hi - lo) for k, v in scores.items()}


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------

DENSE_MAGIC = b"RQDX"
DENSE_VERSION = 1


class SearchIndex:
    """Immutable sparse+dense index over a fixed node set."""

    def __init__(
        self,
        node_ids: list[str],
        term_freqs: list[Counter],
        doc_lens: list[int],
        doc_freq: Counter,
        vectors: np.ndarray,
        dim: int,
    ):
        self.node_ids = node_ids
        self._pos = {nid: i for i, nid in enumerate(node_ids)}
        self._term_freqs = term_freqs
        self._doc_lens = doc_lens
        self._doc_freq = doc_freq
        self._avg_len = sum(doc_lens) / len(doc_lens) if doc_lens else 0.0
        self._vectors = vectors
        self.dim = dim

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, nodes: Iterable[RegNode], provider: EmbeddingProvider) -> "SearchIndex":
        """Index all non-placeholder nodes with postings and unit vectors."""
        nodes = [n for n in nodes if not n.placeholder]
        if not nodes:
            raise EmptyIndex("no non-placeholder nodes to index")
        nodes = sorted(nodes, key=lambda n: n.id)
        node_ids = [n.id for n in nodes]
        term_freqs = [Counter(tokenize(n.text)) for n in nodes]
        doc_lens = [sum(tf.values()) for tf in term_freqs]
        doc_freq = Counter()
        for tf in term_freqs:
            doc_freq.update(tf.keys())
        vectors = provider.embed([n.text for n in nodes])
        return cls(node_ids, term_freqs, doc_lens, doc_freq, vectors, provider.dim)

    # -- scoring ------------------------------------------------------------

    def _index_of(self, node_id: str) -> int:
        try:
            return self._pos[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def score_sparse(self, query: str, node_id: str) -> float:
        """Okapi BM25 with idf = ln((N - df + 0.5)/(df + 0.5) + 1)."""
        i = self._index_of(node_id)
        tf = self._term_freqs[i]
        dl = self._doc_lens[i]
        n_docs = len(self.node_ids)
        score = 0.0
        for term in tokenize(query):
            f = tf.get(term, 0)
            if f == 0:
                continue
            df = self._doc_freq[term]
            idf = math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
            denom = f + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self._avg_len)
            score += idf * f * (BM25_K1 + 1.0) / denom
        return score

    def score_dense(self, query: str, node_id: str, provider: EmbeddingProvider) -> float:
        """Cosine similarity (inner product of unit vectors), in [-1, 1]."""
        i = self._index_of(node_id)
        q = provider.embed([query])[0]
        return float(np.dot(self._vectors[i], q))

    def seed_retrieve(
        self,
        query: str,
        provider: EmbeddingProvider,
        config: RetrievalConfig = RetrievalConfig(),
        candidates: Optional[Iterable[str]] = None,
    ) -> list[ScoredNode]:
        """Top-K candidates by fused score, ties broken by node id.

        ``candidates`` restricts scoring to a subset of indexed nodes
        (used for doc-scoped retrieval); by default every indexed node is
        a candidate.
        """
        if candidates is None:
            cand_ids = self.node_ids
        else:
            cand_ids = sorted(set(candidates) & set(self.node_ids))
        if not cand_ids:
            raise EmptyIndex("no candidate nodes to score")

        q_vec = provider.embed([query])[0]
        sparse = {nid: self.score_sparse(query, nid) for nid in cand_ids}
        dense = {
            nid: float(np.dot(self._vectors[self._pos[nid]], q_vec)) for nid in cand_ids
        }
        if config.normalization == "minmax":
            sparse_n = minmax_normalize(sparse)
            dense_n = minmax_normalize(dense)
        else:
            sparse_n, dense_n = sparse, dense

        lam = config.fusion_lambda
        scored = [
            ScoredNode(
                node_id=nid,
                sparse=sparse_n[nid],
                dense=dense_n[nid],
                fused=lam * dense_n[nid] + (1.0 - lam) * sparse_n[nid],
            )
            for nid in cand_ids
        ]
        scored.sort(key=lambda s: (-s.fused, s.node_id))
        return scored[: config.k_seeds]

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Persist: flat binary dense index + id sidecar + postings JSONL."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        count = len(self.node_ids)
        with (path / "dense.bin").open("wb") as fh:
            fh.write(DENSE_MAGIC)
            fh.write(struct.pack("<III", DENSE_VERSION, self.dim, count))
            fh.write(self._vectors.astype("<f4").tobytes(order="C"))
        (path / "ids.json").write_text(
            json.dumps(self.node_ids, ensure_ascii=False), encoding="utf-8"
        )
        with (path / "postings.jsonl").open("w", encoding="utf-8") as fh:
            for nid, tf, dl in zip(self.node_ids, self._term_freqs, self._doc_lens):
                fh.write(
                    json.dumps(
                        {"id": nid, "tf": dict(sorted(tf.items())), "len": dl},
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "SearchIndex":
        path = Path(path)
        try:
            raw = (path / "dense.bin").read_bytes()
            node_ids = json.loads((path / "ids.json").read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise CorruptSnapshot(f"missing index files under {path}") from exc
        if raw[:4] != DENSE_MAGIC:
            raise CorruptSnapshot("bad dense index magic")
        version, dim, count = struct.unpack("<III", raw[4:16])
        if version != DENSE_VERSION:
            raise CorruptSnapshot(f"unsupported dense index version {version}")
        vectors = np.frombuffer(raw[16:], dtype="<f4")
        if vectors.size != dim * count or count != len(node_ids):
            raise CorruptSnapshot("dense index size mismatch")
        vectors = vectors.reshape(count, dim).copy()

        term_freqs: list[Counter] = []
        doc_lens: list[int] = []
        with (path / "postings.jsonl").open(encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                term_freqs.append(Counter(rec["tf"]))
                doc_lens.append(rec["len"])
        if len(term_freqs) != count:
            raise CorruptSnapshot("postings/vector count mismatch")
        doc_freq = Counter()
        for tf in term_freqs:
            doc_freq.update(tf.keys())
        return cls(node_ids, term_freqs, doc_lens, doc_freq, vectors, dim)
