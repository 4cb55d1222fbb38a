"""Relation-aware expansion of retrieval seeds into a bounded context set.

Three flows run from the seed nodes, each individually switchable:

* validity  — amendment chains are traced to their terminal (legally
  applicable) nodes; terminals rank ahead of intermediate chain nodes,
* reference — direct refers_to neighbors only (depth 1, no drift),
* provenance — the owning document node and metadata of every context
  node are attached.

The result is an ordered, deduplicated context set capped at
``max_context_nodes``; placeholders never appear in it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

from regqa.errors import CycleDetected, DepthExceeded, UnknownSeed
from regqa.graph import RegGraph

VALIDITY_TAG = "validity"
REFERENCE_TAG = "reference"
PROVENANCE_TAG = "provenance"
SEED_TAG = "seed"


@dataclass(frozen=True)
class PropagationConfig:
    enable_validity: bool = True
    enable_reference: bool = True
    enable_provenance: bool = True
    max_trace_depth: int = 8
    max_context_nodes: int = 20

    def __post_init__(self):
        if self.max_trace_depth < 1:
            raise ValueError("max_trace_depth must be >= 1")
        if self.max_context_nodes < 1:
            raise ValueError("max_context_nodes must be >= 1")


@dataclass
class ContextSet:
    """Ordered evidence set: seeds plus tagged expansion nodes.

    ``all`` is the first-occurrence-ordered union of seeds and expansion,
    bounded by the propagation config. ``terminals`` flags which validity
    nodes ended an amendment chain. ``diagnostics`` records placeholders
    met during expansion and per-seed tracing failures.
    """

    seeds: list[str] = field(default_factory=list)
    expanded: list[tuple[str, str]] = field(default_factory=list)  # (id, tag)
    all: list[str] = field(default_factory=list)
    terminals: set[str] = field(default_factory=set)
    diagnostics: list[str] = field(default_factory=list)

    def tag_of(self, node_id: str) -> str:
        if node_id in self.seeds:
            return SEED_TAG
        for nid, tag in self.expanded:
            if nid == node_id:
                return tag
        raise KeyError(node_id)


def _promulgation_key(graph: RegGraph, node_id: str) -> date:
    node = graph.node(node_id)
    if node.meta and node.meta.promulgated:
        return node.meta.promulgated
    return date.min


def propagate(
    seeds: list[str],
    graph: RegGraph,
    config: PropagationConfig = PropagationConfig(),
) -> ContextSet:
    """Expand seeds along the enabled flows into a bounded ContextSet."""
    for s in seeds:
        if s not in graph:
            raise UnknownSeed(s)

    cs = ContextSet(seeds=[])
    seen: set[str] = set()

    def admit_seed(node_id: str) -> None:
        if node_id in seen or len(cs.all) >= config.max_context_nodes:
            return
        if graph.node(node_id).placeholder:
            cs.diagnostics.append(f"placeholder seed skipped: {node_id}")
            return
        seen.add(node_id)
        cs.seeds.append(node_id)
        cs.all.append(node_id)

    def admit(node_id: str, tag: str) -> None:
        if node_id in seen or len(cs.all) >= config.max_context_nodes:
            return
        if graph.node(node_id).placeholder:
            cs.diagnostics.append(f"placeholder excluded: {node_id}")
            return
        seen.add(node_id)
        cs.expanded.append((node_id, tag))
        cs.all.append(node_id)

    for s in seeds:
        admit_seed(s)

    if config.enable_validity:
        for s in cs.seeds:
            try:
                terminals, chain = graph.trace_validity(s, config.max_trace_depth)
            except CycleDetected as exc:
                cs.diagnostics.append(f"cycle at seed {s}: {exc}")
                continue
            except DepthExceeded as exc:
                cs.diagnostics.append(f"depth exceeded at seed {s}: {exc}")
                continue
            cs.terminals |= terminals - {s}
            # terminals first (newest promulgation first), then chain nodes
            ordered_terminals = sorted(
                terminals - {s},
                key=lambda nid: (_promulgation_key(graph, nid).toordinal() * -1, nid),
            )
            for t in ordered_terminals:
                admit(t, VALIDITY_TAG)
            chain_nodes: list[str] = []
            for edge in chain:
                for nid in (edge.src, edge.dst):
                    if nid not in chain_nodes:
                        chain_nodes.append(nid)
            for nid in chain_nodes:
                if nid not in terminals:
                    admit(nid, VALIDITY_TAG)

    if config.enable_reference:
        for s in cs.seeds:
            for nid in sorted(graph.neighbors(s, "refers_to", "out")):
                admit(nid, REFERENCE_TAG)

    if config.enable_provenance:
        for node_id in list(cs.all):
            try:
                doc_node, _ = graph.provenance(node_id)
            except Exception as exc:  # orphan or placeholder
                cs.diagnostics.append(f"no provenance for {node_id}: {exc}")
                continue
            if doc_node.id != node_id:
                admit(doc_node.id, PROVENANCE_TAG)

    return cs


def assemble_context(
    cs: ContextSet,
    graph: RegGraph,
    budget_tokens: int = 6000,
) -> list[dict]:
    """Materialize context texts in evidence order under a token budget.

    Order: validity terminals first, then seeds (in their fused-score
    order), then the remaining expansion nodes. Emission stops at the
    first node whose text would exceed ``budget_tokens``; nodes are never
    truncated mid-text.
    """
    if budget_tokens <= 0:
        raise ValueError("budget_tokens must be positive")

    terminal_ids = [nid for nid, tag in cs.expanded if nid in cs.terminals]
    rest = [nid for nid, _ in cs.expanded if nid not in cs.terminals]
    ordered = terminal_ids + list(cs.seeds) + rest

    out: list[dict] = []
    used = 0
    emitted: set[str] = set()
    for nid in ordered:
        if nid in emitted:
            continue
        node = graph.node(nid)
        n_tokens = len(node.text.split())
        if used + n_tokens > budget_tokens:
            break
        used += n_tokens
        emitted.add(nid)
        try:
            _, meta = graph.provenance(nid)
        except Exception:
            meta = node.meta
        out.append(
            {
                "id": nid,
                "title": (meta.title if meta else "") or "",
                "text": node.text,
                "tag": VALIDITY_TAG if nid in cs.terminals else cs.tag_of(nid),
                "meta": meta.to_json() if meta else None,
            }
        )
    return out
