"""Parsing of regulatory documents into hierarchical legal units.

Vietnamese regulatory documents are segmented at three levels:

  document
  └── Điều / article   ("Điều 1.", "Điều 2." ... at the start of a line)
      └── Khoản / clause ("1.", "2." ... at the start of a line)

Sub-point letters ("a)", "b)") are kept inline inside their clause.
Each unit receives a deterministic identifier of the form
``DocID::D`` (document), ``DocID::Đ<a>`` (article) and
``DocID::Đ<a>::K<c>`` (clause), which the graph layer relies on for
stable referencing and amendment-chain tracing.

Legal cross-references (amends / replaces / supplements / refers-to) are
extracted with rule-based pattern matching over standardized drafting
expressions such as "sửa đổi Điều 5 Thông tư 15/2023/TT-BYT".
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Optional

from regqa.errors import InvalidPath, MalformedDocument

# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

LEGAL_RELATIONS = ("amends", "replaces", "supplements", "refers_to")

DOC_STATUSES = ("in_force", "amended", "expired", "unknown")


@dataclass(frozen=True)
class DocMeta:
    """Provenance metadata of one regulatory document."""

    doc_id: str
    title: str = ""
    promulgated: Optional[date] = None
    authority: str = ""
    status: str = "unknown"

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if self.status not in DOC_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "promulgated": self.promulgated.isoformat() if self.promulgated else None,
            "authority": self.authority,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DocMeta":
        promulgated = obj.get("promulgated")
        return cls(
            doc_id=obj["doc_id"],
            title=obj.get("title", ""),
            promulgated=date.fromisoformat(promulgated) if promulgated else None,
            authority=obj.get("authority", ""),
            status=obj.get("status", "unknown"),
        )


@dataclass(frozen=True)
class UnitPath:
    """Position of a unit inside a document: article and/or clause ordinal.

    ``UnitPath()`` denotes the document unit itself. A clause path normally
    carries its owning article; a bare clause (article unknown) can occur in
    extracted cross-references and is resolved at the document level.
    """

    article: Optional[int] = None
    clause: Optional[int] = None


@dataclass
class LegalUnit:
    """One addressable fragment of a regulation (document/article/clause).

    ``text`` holds only the text exclusively owned by this unit: the
    article header and intro lines for an article whose clauses were split
    out, the preamble for a document with articles. Concatenating unit
    texts in document order reconstructs the normalized input.
    """

    id: str
    kind: str  # document | article | clause
    ordinal: int
    heading: Optional[str]
    text: str
    parent_id: Optional[str]
    doc_id: str


@dataclass(frozen=True)
class ContextTriple:
    """A retrieval context unit: identifier, document title, body text."""

    id: str
    title: str
    text: str


@dataclass(frozen=True)
class RelationMention:
    """One extracted legal cross-reference inside a unit's text."""

    source_id: str
    relation: str  # amends | replaces | supplements | refers_to
    target_doc: str
    target_unit: Optional[UnitPath]
    span: tuple[int, int]

    def __post_init__(self):
        if self.relation not in LEGAL_RELATIONS:
            raise ValueError(f"not a legal relation: {self.relation!r}")


# ---------------------------------------------------------------------------
# Text normalization
# ---------------------------------------------------------------------------

def normalize_text(raw: str) -> str:
    """Normalize a raw document text for parsing and indexing.

    Applies Unicode NFC composition, drops control characters (newlines
    are kept as line separators, tabs become spaces), collapses runs of
    internal whitespace and strips each line. Empty lines are removed.
    Idempotent.
    """
    text = unicodedata.normalize("NFC", raw)
    chars = []
    for ch in text:
        if ch == "\n":
            chars.append(ch)
        elif ch == "\t":
            chars.append(" ")
        elif unicodedata.category(ch) in ("Cc", "Cf"):
            continue
        else:
            chars.append(ch)
    lines = "".join(chars).split("\n")
    lines = [re.sub(r"\s+", " ", ln).strip() for ln in lines]
    return "\n".join(ln for ln in lines if ln)


# ---------------------------------------------------------------------------
# Unit identifiers
# ---------------------------------------------------------------------------

def make_unit_id(doc_id: str, path: UnitPath) -> str:
    """Deterministic unit identifier: DocID::D, DocID::Đ<a>, DocID::Đ<a>::K<c>."""
    if not doc_id:
        raise InvalidPath("doc_id must be non-empty")
    if path.article is None and path.clause is None:
        return f"{doc_id}::D"
    if path.article is None:
        raise InvalidPath("clause path requires an article ordinal")
    if path.article <= 0:
        raise InvalidPath(f"non-positive article ordinal {path.article}")
    if path.clause is None:
        return f"{doc_id}::Đ{path.article}"
    if path.clause <= 0:
        raise InvalidPath(f"non-positive clause ordinal {path.clause}")
    return f"{doc_id}::Đ{path.article}::K{path.clause}"


# ---------------------------------------------------------------------------
# Hierarchical parsing
# ---------------------------------------------------------------------------

_ARTICLE_RE = re.compile(r"^Điều\s+(\d+)\s*[.:]?\s*(.*)$")
_CLAUSE_RE = re.compile(r"^(\d+)\.\s*(.*)$")


def parse_document(raw: str, meta: DocMeta) -> list[LegalUnit]:
    """Segment a document into a tree of legal units.

    Articles split on line-initial "Điều <n>" markers, clauses on
    line-initial "<n>." enumerations inside an article. Returns the
    document unit first, then articles and clauses in document order.
    """
    text = normalize_text(raw)
    if not text:
        raise MalformedDocument(f"{meta.doc_id}: no text after normalization")

    doc_unit = LegalUnit(
        id=make_unit_id(meta.doc_id, UnitPath()),
        kind="document",
        ordinal=0,
        heading=meta.title or None,
        text="",
        parent_id=None,
        doc_id=meta.doc_id,
    )
    units: list[LegalUnit] = [doc_unit]

    current_article: Optional[LegalUnit] = None
    current_clause: Optional[LegalUnit] = None

    def append_line(line: str) -> None:
        target = current_clause or current_article or doc_unit
        target.text = f"{target.text}\n{line}" if target.text else line

    for line in text.split("\n"):
        m = _ARTICLE_RE.match(line)
        if m:
            ordinal = int(m.group(1))
            current_article = LegalUnit(
                id=make_unit_id(meta.doc_id, UnitPath(article=ordinal)),
                kind="article",
                ordinal=ordinal,
                heading=m.group(2) or None,
                text=line,
                parent_id=doc_unit.id,
                doc_id=meta.doc_id,
            )
            current_clause = None
            units.append(current_article)
            continue
        m = _CLAUSE_RE.match(line) if current_article is not None else None
        if m:
            ordinal = int(m.group(1))
            current_clause = LegalUnit(
                id=make_unit_id(
                    meta.doc_id,
                    UnitPath(article=current_article.ordinal, clause=ordinal),
                ),
                kind="clause",
                ordinal=ordinal,
                heading=None,
                text=line,
                parent_id=current_article.id,
                doc_id=meta.doc_id,
            )
            units.append(current_clause)
            continue
        append_line(line)

    return units


# ---------------------------------------------------------------------------
# Relation-mention extraction
# ---------------------------------------------------------------------------

#: Default trigger patterns, one rule family per legal relation kind.
DEFAULT_RULES: list[tuple[str, str]] = [
    ("amends", r"sửa\s+đổi"),
    ("replaces", r"thay\s+thế"),
    ("supplements", r"bổ\s+sung"),
    ("refers_to", r"căn\s+cứ"),
]

# Canonical Vietnamese document identifiers, e.g. 15/2023/TT-BYT, 59/2020/QH14.
_DOC_ID_RE = re.compile(r"\b(\d{1,4}/\d{4}/[A-ZĐ][A-ZĐ0-9]*(?:-[A-ZĐ0-9]+)*)")
# "của Luật này", "Thông tư này": the citing document itself.
_SELF_REF_RE = re.compile(
    r"\b(?:Luật|Thông tư|Nghị định|Quyết định|văn bản) này", re.IGNORECASE
)

def load_rules(path: str | Path) -> list[tuple[str, str]]:
    """Load pattern rules from a plain-text file: `<relation> TAB <pattern>`."""
    rules = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        relation, _, pattern = line.partition("\t")
        relation = relation.strip()
        if relation not in LEGAL_RELATIONS:
            raise ValueError(f"unknown relation kind in rule file: {relation!r}")
        rules.append((relation, pattern.strip()))
    if not rules:
        raise ValueError(f"no rules in {path}")
    return rules


def extract_relation_mentions(
    unit: LegalUnit,
    rules: Optional[Iterable[tuple[str, str]]] = None,
) -> list[RelationMention]:
    """Find legal cross-references in a unit's text.

    For every trigger-phrase match the remainder of the sentence is
    scanned for a unit path ("Điều 5", "Khoản 2 Điều 5") and a document
    citation; an explicit citation binds the mention to that document,
    otherwise the mention is intra-document. Matches are returned
    non-overlapping, in document order.
    """
    if rules is None:
        rules = DEFAULT_RULES
    compiled = [(rel, re.compile(pat, re.IGNORECASE)) for rel, pat in rules]

    text = unit.text
    hits: list[tuple[int, int, str]] = []  # (start, trigger_end, relation)
    for relation, pattern in compiled:
        for m in pattern.finditer(text):
            hits.append((m.start(), m.end(), relation))
    hits.sort()

    mentions: list[RelationMention] = []
    last_end = -1
    for i, (start, trigger_end, relation) in enumerate(hits):
        if start < last_end:
            continue
        # scan to the end of the sentence (or the next trigger) for the target
        sentence_end = len(text)
        for stop in ".;\n":
            pos = text.find(stop, trigger_end)
            if pos != -1:
                sentence_end = min(sentence_end, pos)
        if i + 1 < len(hits):
            sentence_end = min(sentence_end, hits[i + 1][0])
        window = text[trigger_end:sentence_end]

        article = clause = None
        unit_end = trigger_end
        m_article = re.search(r"Điều\s+(\d+)", window)
        m_clause = re.search(r"[Kk]hoản\s+(\d+)", window)
        if m_clause:
            clause = int(m_clause.group(1))
            unit_end = max(unit_end, trigger_end + m_clause.end())
        if m_article:
            article = int(m_article.group(1))
            unit_end = max(unit_end, trigger_end + m_article.end())

        target_doc = unit.doc_id
        m_doc = _DOC_ID_RE.search(window)
        if m_doc:
            target_doc = m_doc.group(1)
            unit_end = max(unit_end, trigger_end + m_doc.end())
        elif _SELF_REF_RE.search(window):
            unit_end = max(
                unit_end, trigger_end + _SELF_REF_RE.search(window).end()
            )

        target_unit = (
            UnitPath(article=article, clause=clause)
            if article is not None or clause is not None
            else None
        )
        mentions.append(
            RelationMention(
                source_id=unit.id,
                relation=relation,
                target_doc=target_doc,
                target_unit=target_unit,
                span=(start, unit_end),
            )
        )
        last_end = unit_end

    return mentions


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------

@dataclass
class CorpusDocument:
    """One raw input document prior to parsing."""

    meta: DocMeta
    text: str


def load_corpus(path: str | Path) -> list[CorpusDocument]:
    """Read a corpus from a JSONL file or a directory of JSON/text files.

    JSONL records have the shape
    {"id", "title", "text", "meta": {"doc_id", "promulgated", "authority",
    "status"}}; the outer "id"/"title" fill in missing meta fields.
    """
    path = Path(path)
    docs: list[CorpusDocument] = []
    if path.is_dir():
        for child in sorted(path.iterdir()):
            if child.suffix == ".jsonl":
                docs.extend(load_corpus(child))
            elif child.suffix == ".txt":
                docs.append(
                    CorpusDocument(
                        meta=DocMeta(doc_id=child.stem, title=child.stem),
                        text=child.read_text(encoding="utf-8"),
                    )
                )
        return docs
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            meta_obj = dict(rec.get("meta") or {})
            meta_obj.setdefault("doc_id", rec.get("id"))
            meta_obj.setdefault("title", rec.get("title", ""))
            docs.append(
                CorpusDocument(meta=DocMeta.from_json(meta_obj), text=rec["text"])
            )
    return docs
