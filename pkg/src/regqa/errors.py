"""Exception hierarchy shared across the package."""


class RegQAError(Exception):
    """Base class for all package-specific errors."""


# --- corpus / parsing ---

class MalformedDocument(RegQAError):
    """Raised when a document has no parseable text after normalization."""


class InvalidPath(RegQAError):
    """Raised for unit paths with non-positive ordinals."""


# --- graph ---

class DuplicateDocument(RegQAError):
    """Raised when a doc_id is re-ingested with different content."""


class UnknownNode(RegQAError):
    """Raised when a node id is not present in the graph."""


class CycleDetected(RegQAError):
    """Raised when an amendment chain revisits a node on the current path."""


class DepthExceeded(RegQAError):
    """Raised when an amendment chain exceeds the traversal depth bound."""


class OrphanNode(RegQAError):
    """Raised when a node has no structural path to a document node."""


class CorruptSnapshot(RegQAError):
    """Raised on schema mismatch when loading a persisted snapshot."""


# --- retrieval ---

class EmptyIndex(RegQAError):
    """Raised when an index is built from, or queried over, no nodes."""


class ProviderFailure(RegQAError):
    """Raised when an embedding or language-model provider call fails."""


class UnknownDocument(RegQAError):
    """Raised when a document id scoping a query matches nothing."""


# --- propagation ---

class UnknownSeed(RegQAError):
    """Raised when a propagation seed is not present in the graph."""


# --- dataset pipeline ---

class ZeroVector(RegQAError):
    """Raised when a zero vector is given where a direction is required."""


class InvalidK(RegQAError):
    """Raised when a cluster count is outside [1, n_points]."""


class InfeasibleConstraints(RegQAError):
    """Raised when tuple sampling constraints cannot be satisfied at all."""


class GeneratorFailure(RegQAError):
    """Raised when a QA generator fails to produce a record."""


# --- evaluation ---

class EmptyGold(RegQAError):
    """Raised when recall is requested against an empty gold set."""
