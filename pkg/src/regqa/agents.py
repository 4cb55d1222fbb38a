"""Four-stage QA pipeline over the regulatory graph.

* interpreter — decides whether a query is regulatory, extracts document
  identifiers, and routes around retrieval for chit-chat,
* pathfinder  — seeded hybrid retrieval plus relation-aware propagation,
* auditor     — checks that every generated sentence is lexically
  supported by a cited context and that citations stay inside the
  supplied context set,
* conductor   — orchestrates generation, a single audited retry, and
  abstention when grounding fails.

Generation goes through an LMProvider interface. The bundled
TemplateLMProvider is fully deterministic and builds its answer only from
the context blocks embedded in the prompt, so the whole pipeline runs
offline in tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol, Sequence

from regqa.errors import EmptyIndex, ProviderFailure
from regqa.graph import ALL_RELATIONS, RegGraph
from regqa.propagation import (
    ContextSet,
    PropagationConfig,
    assemble_context,
    propagate,
)
from regqa.retrieval import (
    EmbeddingProvider,
    RetrievalConfig,
    ScoredNode,
    SearchIndex,
    tokenize,
)

ABSTENTION_TEXT = (
    "Tôi không đủ căn cứ pháp lý để trả lời câu hỏi này. "
    "Vui lòng cung cấp thêm thông tin hoặc văn bản liên quan."
)

NON_REGULATORY_TEXT = (
    "Câu hỏi không thuộc phạm vi văn bản quy phạm pháp luật; "
    "tôi chỉ hỗ trợ tra cứu quy định."
)

# Vietnamese legal document identifiers, e.g. 15/2023/TT-BYT, 59/2020/QH14.
DOC_ID_RE = re.compile(r"\b(\d{1,4}/\d{4}/[A-ZĐ][A-ZĐ0-9]*(?:-[A-ZĐ0-9]+)*)")

REGULATORY_KEYWORDS = (
    "thông tư",
    "nghị định",
    "quyết định",
    "luật",
    "điều",
    "khoản",
    "quy định",
    "ban hành",
    "sửa đổi",
    "bổ sung",
    "thay thế",
    "hiệu lực",
    "văn bản",
    "pháp luật",
    "quy chế",
    "hướng dẫn",
)

_VIETNAMESE_CHARS = set(
    "ăâđêôơưáàảãạắằẳẵặấầẩẫậéèẻẽẹếềểễệíìỉĩịóòỏõọốồổỗộớờởỡợúùủũụứừửữựýỳỷỹỵ"
)


@dataclass(frozen=True)
class QueryIntent:
    is_regulatory: bool
    doc_ids: tuple[str, ...]
    needs_graph: bool
    language: str  # vi | other

    def __post_init__(self):
        if self.needs_graph and not self.is_regulatory:
            raise ValueError("needs_graph requires is_regulatory")


@dataclass(frozen=True)
class AuditVerdict:
    grounded: bool
    unsupported_claims: tuple[str, ...]
    cited_ids_ok: bool


@dataclass
class Answer:
    text: str
    citations: list[str]
    abstained: bool
    context_used: ContextSet
    diagnostics: list[str] = field(default_factory=list)
    prompt_tokens: int = 0

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "citations": list(self.citations),
            "abstained": self.abstained,
            "context_ids": list(self.context_used.all),
            "diagnostics": list(self.diagnostics),
        }


# ---------------------------------------------------------------------------
# Language-model provider
# ---------------------------------------------------------------------------

class LMProvider(Protocol):
    def complete(self, prompt: str, **params) -> str:
        ...


_CONTEXT_BLOCK_RE = re.compile(
    r"\[context id=(?P<id>[^\]]+)\]\n(?P<body>.*?)\n\[/context\]", re.DOTALL
)


def format_context_block(ctx: dict) -> str:
    title = f" — {ctx['title']}" if ctx.get("title") else ""
    return f"[context id={ctx['id']}]\n{ctx['text']}{title}\n[/context]"


class TemplateLMProvider:
    """Deterministic generator: restates the supplied context blocks.

    The answer is assembled exclusively from the ``[context id=...]``
    blocks found in the prompt; identical prompts yield identical output.
    """

    def complete(self, prompt: str, **params) -> str:
        blocks = _CONTEXT_BLOCK_RE.findall(prompt)
        if not blocks:
            return NON_REGULATORY_TEXT
        parts = []
        for ctx_id, body in blocks:
            first_line = body.strip().split("\n")[0]
            parts.append(f"Theo [{ctx_id}]: {first_line}")
        return "\n".join(parts)


class HttpLMProvider:
    """Remote completion endpoint: POST {"prompt": ...} -> {"text": ...}."""

    def __init__(self, url: str, token_env: str = "REGQA_LM_TOKEN", timeout: float = 60.0):
        self.url = url
        self.token_env = token_env
        self.timeout = timeout

    def complete(self, prompt: str, **params) -> str:
        import os

        import httpx

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = httpx.post(
                self.url,
                json={"prompt": prompt, **params},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["text"]
        except Exception as exc:  # noqa: BLE001
            raise ProviderFailure(f"completion call failed: {exc}") from exc


def load_prompt_template(path: Optional[str | Path] = None) -> str:
    """Read the answer prompt template ({query}, {contexts}, {flags})."""
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return resources.files("regqa.data").joinpath("answer_prompt.txt").read_text(
        encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------

def interpret(query: str) -> QueryIntent:
    """Rule-based intent analysis: identifiers, regulatory cues, language."""
    if not query:
        raise ValueError("query must be non-empty")
    lowered = query.lower()
    doc_ids = tuple(dict.fromkeys(DOC_ID_RE.findall(query)))
    is_regulatory = bool(doc_ids) or any(kw in lowered for kw in REGULATORY_KEYWORDS)
    language = "vi" if any(ch in _VIETNAMESE_CHARS for ch in lowered) else "other"
    return QueryIntent(
        is_regulatory=is_regulatory,
        doc_ids=doc_ids,
        needs_graph=is_regulatory,
        language=language,
    )


# ---------------------------------------------------------------------------
# Auditor
# ---------------------------------------------------------------------------

_SENTENCE_SPLIT_RE = re.compile(r"[.!?\n]+")


def audit(
    answer_text: str,
    citations: Sequence[str],
    cs: ContextSet,
    context_texts: dict[str, str],
    overlap_threshold: float = 0.3,
) -> AuditVerdict:
    """Check citation soundness and per-sentence lexical support.

    A sentence is supported when at least ``overlap_threshold`` of its
    content tokens appear in some cited context. Sentences are checked
    independently, so adding text never rescues an unsupported claim.
    """
    cited_ids_ok = set(citations) <= set(cs.all)
    cited_token_sets = [
        set(tokenize(context_texts[cid])) for cid in citations if cid in context_texts
    ]

    unsupported: list[str] = []
    for sentence in _SENTENCE_SPLIT_RE.split(answer_text):
        sentence = sentence.strip()
        if not sentence:
            continue
        tokens = [t for t in tokenize(sentence) if len(t) > 1 and not t.isdigit()]
        if not tokens:
            continue
        supported = False
        for ctx_tokens in cited_token_sets:
            overlap = sum(1 for t in tokens if t in ctx_tokens) / len(tokens)
            if overlap >= overlap_threshold:
                supported = True
                break
        if not supported:
            unsupported.append(sentence)

    return AuditVerdict(
        grounded=cited_ids_ok and not unsupported,
        unsupported_claims=tuple(unsupported),
        cited_ids_ok=cited_ids_ok,
    )


# ---------------------------------------------------------------------------
# Engine (pathfinder + conductor)
# ---------------------------------------------------------------------------

@dataclass
class AgentConfig:
    """Pipeline switches and thresholds; the use_* flags are ablation hooks."""

    use_interpreter: bool = True
    use_auditor: bool = True
    use_propagation: bool = True
    overlap_threshold: float = 0.3
    budget_tokens: int = 6000


class QAEngine:
    """The assembled pipeline over one graph + index snapshot."""

    def __init__(
        self,
        graph: RegGraph,
        index: SearchIndex,
        embedder: EmbeddingProvider,
        lm: Optional[LMProvider] = None,
        retrieval_config: RetrievalConfig = RetrievalConfig(),
        propagation_config: PropagationConfig = PropagationConfig(),
        agent_config: AgentConfig = AgentConfig(),
        prompt_template: Optional[str] = None,
    ):
        self.graph = graph
        self.index = index
        self.embedder = embedder
        self.lm = lm or TemplateLMProvider()
        self.retrieval_config = retrieval_config
        self.propagation_config = propagation_config
        self.agent_config = agent_config
        self.prompt_template = prompt_template or load_prompt_template()

    # -- pathfinder ---------------------------------------------------------

    def _doc_scope(self, doc_ids: Sequence[str]) -> tuple[Optional[set[str]], list[str]]:
        """Candidate node ids for doc-scoped retrieval: the named documents'
        nodes plus their direct graph neighbors. Unknown doc ids are
        reported and scoping falls back to the full corpus."""
        diagnostics: list[str] = []
        scope: set[str] = set()
        matched = False
        for doc_id in doc_ids:
            doc_nodes = {
                n.id for n in self.graph.nodes() if n.id.split("::")[0] == doc_id
            }
            if not doc_nodes:
                diagnostics.append(f"unknown document: {doc_id}")
                continue
            matched = True
            scope |= doc_nodes
            for nid in doc_nodes:
                for relation in ALL_RELATIONS:
                    scope |= self.graph.neighbors(nid, relation, "out")
                    scope |= self.graph.neighbors(nid, relation, "in")
        if not matched:
            return None, diagnostics
        return scope, diagnostics

    def seed_retrieve(
        self, query: str, intent: Optional[QueryIntent] = None
    ) -> tuple[list[ScoredNode], list[str]]:
        candidates = None
        diagnostics: list[str] = []
        if intent is not None and intent.doc_ids:
            candidates, diagnostics = self._doc_scope(intent.doc_ids)
        seeds = self.index.seed_retrieve(
            query, self.embedder, self.retrieval_config, candidates=candidates
        )
        return seeds, diagnostics

    def _has_signal(self, query: str, node_id: str) -> bool:
        """True when the node carries any raw lexical or semantic evidence."""
        if self.index.score_sparse(query, node_id) > 0.0:
            return True
        return self.index.score_dense(query, node_id, self.embedder) > 1e-6

    def pathfind(self, query: str, intent: Optional[QueryIntent] = None) -> ContextSet:
        """Seeded retrieval, then propagation (unless ablated).

        Seeds with zero raw evidence in both channels are dropped; a
        query matching nothing yields an empty context set, which the
        conductor turns into an abstention.
        """
        seeds, diagnostics = self.seed_retrieve(query, intent)
        seed_ids = [s.node_id for s in seeds if self._has_signal(query, s.node_id)]
        if self.agent_config.use_propagation:
            cs = propagate(seed_ids, self.graph, self.propagation_config)
        else:
            cs = ContextSet(seeds=list(seed_ids), all=list(seed_ids))
        cs.diagnostics.extend(diagnostics)
        return cs

    def assemble(self, cs: ContextSet) -> list[dict]:
        return assemble_context(cs, self.graph, self.agent_config.budget_tokens)

    # -- conductor ----------------------------------------------------------

    def _generate(self, query: str, contexts: list[dict], flags: str = "") -> tuple[str, int]:
        blocks = "\n".join(format_context_block(c) for c in contexts)
        prompt = self.prompt_template.format(query=query, contexts=blocks, flags=flags)
        return self.lm.complete(prompt), len(prompt.split())

    def answer_query(self, query: str) -> Answer:
        """Full pipeline: interpret, retrieve, generate, audit, abstain."""
        if self.agent_config.use_interpreter:
            intent = interpret(query)
        else:
            intent = QueryIntent(
                is_regulatory=True, doc_ids=(), needs_graph=True, language="vi"
            )

        if not intent.needs_graph:
            return Answer(
                text=NON_REGULATORY_TEXT,
                citations=[],
                abstained=False,
                context_used=ContextSet(),
                diagnostics=["non-regulatory query; retrieval skipped"],
            )

        try:
            cs = self.pathfind(query, intent)
        except EmptyIndex as exc:
            return Answer(
                text=ABSTENTION_TEXT,
                citations=[],
                abstained=True,
                context_used=ContextSet(),
                diagnostics=[f"retrieval failed: {exc}"],
            )

        contexts = self.assemble(cs)
        if not contexts:
            return Answer(
                text=ABSTENTION_TEXT,
                citations=[],
                abstained=True,
                context_used=cs,
                diagnostics=["empty context set"],
            )

        citations = [c["id"] for c in contexts]
        context_texts = {c["id"]: c["text"] for c in contexts}

        try:
            text, prompt_tokens = self._generate(query, contexts)
        except ProviderFailure as exc:
            return Answer(
                text=ABSTENTION_TEXT,
                citations=[],
                abstained=True,
                context_used=cs,
                diagnostics=[f"provider failure: {exc}"],
            )

        if not self.agent_config.use_auditor:
            return Answer(
                text=text,
                citations=citations,
                abstained=False,
                context_used=cs,
                prompt_tokens=prompt_tokens,
            )

        verdict = audit(
            text, citations, cs, context_texts, self.agent_config.overlap_threshold
        )
        if verdict.grounded:
            return Answer(
                text=text,
                citations=citations,
                abstained=False,
                context_used=cs,
                prompt_tokens=prompt_tokens,
            )

        # one audited regeneration with the auditor's flags in the prompt
        flags = "Cảnh báo: các câu sau thiếu căn cứ, hãy loại bỏ hoặc sửa lại:\n" + "\n".join(
            verdict.unsupported_claims
        )
        try:
            text, prompt_tokens = self._generate(query, contexts, flags=flags)
        except ProviderFailure as exc:
            return Answer(
                text=ABSTENTION_TEXT,
                citations=[],
                abstained=True,
                context_used=cs,
                diagnostics=[f"provider failure on retry: {exc}"],
            )
        verdict = audit(
            text, citations, cs, context_texts, self.agent_config.overlap_threshold
        )
        if verdict.grounded:
            return Answer(
                text=text,
                citations=citations,
                abstained=False,
                context_used=cs,
                diagnostics=["regenerated once after failed audit"],
                prompt_tokens=prompt_tokens,
            )
        return Answer(
            text=ABSTENTION_TEXT,
            citations=[],
            abstained=True,
            context_used=cs,
            diagnostics=["audit failed after retry"]
            + [f"unsupported: {c}" for c in verdict.unsupported_claims],
        )
