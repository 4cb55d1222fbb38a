"""Directed labeled graph over legal units with typed edges.

Nodes are legal units (documents, articles, clauses); edges carry either a
structural relation (has_article, has_clause) linking parent to child
within one document, or a legal relation (amends, replaces, supplements,
refers_to) linking an amending/referring unit to its target, possibly in
another document. Targets not yet ingested become placeholder nodes that
are filled in when the owning document arrives.

Edges are stored amending->amended; validity tracing therefore walks
*incoming* amendment-family edges from an old provision towards the
newest one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from regqa.corpus import DocMeta, LegalUnit, RelationMention, UnitPath, make_unit_id
from regqa.errors import (
    CorruptSnapshot,
    CycleDetected,
    DepthExceeded,
    DuplicateDocument,
    OrphanNode,
    UnknownNode,
)

STRUCTURAL_RELATIONS = frozenset({"has_article", "has_clause"})
LEGAL_RELATIONS = frozenset({"amends", "replaces", "supplements", "refers_to"})
AMENDMENT_RELATIONS = frozenset({"amends", "replaces", "supplements"})
ALL_RELATIONS = STRUCTURAL_RELATIONS | LEGAL_RELATIONS

SNAPSHOT_VERSION = 1


@dataclass
class RegNode:
    """One graph vertex: a legal unit or a placeholder for one."""

    id: str
    kind: str  # document | article | clause
    text: str
    meta: Optional[DocMeta]
    placeholder: bool = False


@dataclass(frozen=True)
class TypedEdge:
    """Directed labeled edge (src, relation, dst)."""

    src: str
    relation: str
    dst: str

    def __post_init__(self):
        if self.relation not in ALL_RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.src == self.dst:
            raise ValueError(f"self-loop on {self.src!r}")


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    graph_tokens: int

    def to_json(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": self.edge_count,
            "graph_tokens": self.graph_tokens,
        }


@dataclass
class IngestionReport:
    """What one document ingestion changed in the graph."""

    doc_id: str
    nodes_added: int = 0
    placeholders_created: int = 0
    placeholders_resolved: int = 0
    edges_added: int = 0
    already_ingested: bool = False


def _placeholder_kind(unit_id: str) -> str:
    parts = unit_id.split("::")
    if len(parts) >= 3:
        return "clause"
    if len(parts) == 2 and parts[1].startswith("Đ"):
        return "article"
    return "document"


class RegGraph:
    """Mutable store for the regulatory graph.

    Build-phase writes (ingestion) must be serialized by the caller; once
    built (or loaded from a snapshot) the graph is safe for concurrent
    read-only queries.
    """

    def __init__(self):
        self._nodes: dict[str, RegNode] = {}
        self._edges: set[TypedEdge] = set()
        # adjacency: relation -> src -> set(dst), and the reverse
        self._out: dict[str, dict[str, set[str]]] = {}
        self._in: dict[str, dict[str, set[str]]] = {}
        self._ingested_docs: dict[str, str] = {}  # doc_id -> concatenated text

    # -- basic accessors ----------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> RegNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def nodes(self, include_placeholders: bool = True) -> list[RegNode]:
        out = list(self._nodes.values())
        if not include_placeholders:
            out = [n for n in out if not n.placeholder]
        return out

    def edges(self) -> set[TypedEdge]:
        return set(self._edges)

    # -- construction -------------------------------------------------------

    def _ensure_node(self, node: RegNode) -> bool:
        """Insert a node; fill a matching placeholder in place. Returns True if new."""
        existing = self._nodes.get(node.id)
        if existing is None:
            self._nodes[node.id] = node
            return True
        if existing.placeholder and not node.placeholder:
            # placeholder resolution keeps all incident edges
            existing.text = node.text
            existing.meta = node.meta
            existing.kind = node.kind
            existing.placeholder = False
        return False

    def _add_edge(self, edge: TypedEdge) -> bool:
        if edge in self._edges:
            return False
        self._edges.add(edge)
        self._out.setdefault(edge.relation, {}).setdefault(edge.src, set()).add(edge.dst)
        self._in.setdefault(edge.relation, {}).setdefault(edge.dst, set()).add(edge.src)
        return True

    def ingest_document(
        self,
        units: list[LegalUnit],
        mentions: Iterable[RelationMention] = (),
        meta: Optional[DocMeta] = None,
    ) -> IngestionReport:
        """Upsert one parsed document tree plus its extracted cross-references.

        Structural edges follow the tree (document -has_article-> article
        -has_clause-> clause); each mention becomes a legal edge from its
        source unit to the referenced unit, creating a placeholder node
        when the target is not ingested yet. Re-ingesting identical
        content is a no-op; different content for a known doc_id raises.
        """
        if not units or units[0].kind != "document":
            raise ValueError("units must start with the document unit")
        doc_unit = units[0]
        doc_id = doc_unit.doc_id
        fingerprint = "\n".join(u.text for u in units)

        report = IngestionReport(doc_id=doc_id)
        if doc_id in self._ingested_docs:
            if self._ingested_docs[doc_id] != fingerprint:
                raise DuplicateDocument(doc_id)
            report.already_ingested = True
            return report
        self._ingested_docs[doc_id] = fingerprint

        if meta is None:
            meta = self._doc_meta_for(doc_unit)
        for u in units:
            if self._ensure_node(
                RegNode(id=u.id, kind=u.kind, text=u.text, meta=meta, placeholder=False)
            ):
                report.nodes_added += 1
            else:
                report.placeholders_resolved += 1
            if u.parent_id is not None:
                relation = "has_article" if u.kind == "article" else "has_clause"
                if self._add_edge(TypedEdge(u.parent_id, relation, u.id)):
                    report.edges_added += 1

        for mention in mentions:
            target_id = self._target_node_id(mention)
            if target_id == mention.source_id:
                continue  # degenerate self-reference; illegal as an edge
            if target_id not in self._nodes:
                self._nodes[target_id] = RegNode(
                    id=target_id,
                    kind=_placeholder_kind(target_id),
                    text="",
                    meta=None,
                    placeholder=True,
                )
                report.placeholders_created += 1
            if self._add_edge(TypedEdge(mention.source_id, mention.relation, target_id)):
                report.edges_added += 1

        return report

    @staticmethod
    def _doc_meta_for(unit: LegalUnit) -> DocMeta:
        return DocMeta(doc_id=unit.doc_id, title=unit.heading or "")

    @staticmethod
    def _target_node_id(mention: RelationMention) -> str:
        path = mention.target_unit
        if path is None or (path.article is None and path.clause is None):
            return make_unit_id(mention.target_doc, UnitPath())
        if path.article is None:
            # bare clause reference without an article: resolve at document level
            return make_unit_id(mention.target_doc, UnitPath())
        return make_unit_id(mention.target_doc, path)

    def set_doc_meta(self, doc_id: str, meta: DocMeta) -> None:
        """Attach full metadata to an ingested document node."""
        node = self.node(f"{doc_id}::D")
        node.meta = meta

    # -- queries ------------------------------------------------------------

    def neighbors(self, v: str, relation: str, direction: str = "out") -> set[str]:
        """Adjacent node ids of ``v`` under one relation kind."""
        if v not in self._nodes:
            raise UnknownNode(v)
        if direction not in ("out", "in"):
            raise ValueError(f"direction must be out|in, got {direction!r}")
        table = self._out if direction == "out" else self._in
        return set(table.get(relation, {}).get(v, ()))

    def _amenders(self, v: str) -> set[str]:
        """Nodes that amend/replace/supplement ``v`` (incoming amendment edges)."""
        out: set[str] = set()
        for r in AMENDMENT_RELATIONS:
            out |= self._in.get(r, {}).get(v, set())
        return out

    def trace_validity(self, v: str, max_depth: int = 8) -> tuple[set[str], list[TypedEdge]]:
        """Follow amendment chains from ``v`` to the legally applicable terminals.

        Walks transitively towards the nodes that amend ``v`` and returns
        every reachable node with no further amending node, plus the edges
        traversed. A node revisited on the current path raises
        CycleDetected; a chain longer than ``max_depth`` raises
        DepthExceeded.
        """
        if v not in self._nodes:
            raise UnknownNode(v)
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")

        terminals: set[str] = set()
        chain: list[TypedEdge] = []
        seen_edges: set[TypedEdge] = set()

        def visit(node: str, depth: int, on_path: set[str]) -> None:
            amenders = self._amenders(node)
            if not amenders:
                terminals.add(node)
                return
            if depth >= max_depth:
                raise DepthExceeded(f"chain from {v} exceeds depth {max_depth}")
            for nxt in sorted(amenders):
                if nxt in on_path:
                    raise CycleDetected(f"amendment cycle through {nxt}")
                for r in AMENDMENT_RELATIONS:
                    if nxt in self._in.get(r, {}).get(node, set()):
                        edge = TypedEdge(nxt, r, node)
                        if edge not in seen_edges:
                            seen_edges.add(edge)
                            chain.append(edge)
                visit(nxt, depth + 1, on_path | {nxt})

        visit(v, 0, {v})
        return terminals, chain

    def provenance(self, v: str) -> tuple[RegNode, Optional[DocMeta]]:
        """Owning document node and metadata of a non-placeholder unit."""
        node = self.node(v)
        if node.placeholder:
            raise UnknownNode(f"{v} is a placeholder")
        current = node
        visited = {current.id}
        while current.kind != "document":
            parents: set[str] = set()
            for r in STRUCTURAL_RELATIONS:
                parents |= self._in.get(r, {}).get(current.id, set())
            parents -= visited
            if not parents:
                raise OrphanNode(v)
            current = self._nodes[min(parents)]
            visited.add(current.id)
        return current, current.meta

    def stats(self) -> GraphStats:
        tokens = sum(
            len(n.text.split()) for n in self._nodes.values() if not n.placeholder
        )
        return GraphStats(
            node_count=len(self._nodes),
            edge_count=len(self._edges),
            graph_tokens=tokens,
        )

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the snapshot: nodes.jsonl + edges.jsonl, sorted by id."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        with (path / "nodes.jsonl").open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"snapshot_version": SNAPSHOT_VERSION}) + "\n")
            for node in sorted(self._nodes.values(), key=lambda n: n.id):
                fh.write(
                    json.dumps(
                        {
                            "id": node.id,
                            "kind": node.kind,
                            "text": node.text,
                            "placeholder": node.placeholder,
                            "meta": node.meta.to_json() if node.meta else None,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        with (path / "edges.jsonl").open("w", encoding="utf-8") as fh:
            for edge in sorted(self._edges, key=lambda e: (e.src, e.relation, e.dst)):
                fh.write(
                    json.dumps(
                        {"src": edge.src, "relation": edge.relation, "dst": edge.dst},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        with (path / "docs.json").open("w", encoding="utf-8") as fh:
            json.dump(self._ingested_docs, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "RegGraph":
        path = Path(path)
        nodes_file = path / "nodes.jsonl"
        edges_file = path / "edges.jsonl"
        if not nodes_file.exists() or not edges_file.exists():
            raise CorruptSnapshot(f"missing snapshot files under {path}")
        graph = cls()
        with nodes_file.open(encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("snapshot_version") != SNAPSHOT_VERSION:
                raise CorruptSnapshot(f"unsupported snapshot version: {header}")
            for line in fh:
                rec = json.loads(line)
                try:
                    graph._nodes[rec["id"]] = RegNode(
                        id=rec["id"],
                        kind=rec["kind"],
                        text=rec["text"],
                        meta=DocMeta.from_json(rec["meta"]) if rec["meta"] else None,
                        placeholder=rec["placeholder"],
                    )
                except KeyError as exc:
                    raise CorruptSnapshot(f"bad node record: {rec}") from exc
        with edges_file.open(encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                try:
                    edge = TypedEdge(rec["src"], rec["relation"], rec["dst"])
                except (KeyError, ValueError) as exc:
                    raise CorruptSnapshot(f"bad edge record: {rec}") from exc
                graph._add_edge(edge)
        docs_file = path / "docs.json"
        if docs_file.exists():
            graph._ingested_docs = json.loads(docs_file.read_text(encoding="utf-8"))
        return graph
