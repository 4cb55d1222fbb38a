"""Graph-grounded retrieval and QA over hierarchical regulatory documents.

The package is organised around a directed labeled graph of legal units
(documents, articles, clauses) connected by structural and legal-semantic
relations. On top of the graph it provides hybrid sparse+dense seeded
retrieval, relation-aware context propagation, a four-agent QA pipeline,
a multihop dataset-construction pipeline, and an evaluation kit.
"""

from regqa.errors import (
    CorruptSnapshot,
    CycleDetected,
    DepthExceeded,
    DuplicateDocument,
    EmptyGold,
    EmptyIndex,
    GeneratorFailure,
    InfeasibleConstraints,
    InvalidK,
    InvalidPath,
    MalformedDocument,
    OrphanNode,
    ProviderFailure,
    UnknownDocument,
    UnknownNode,
    UnknownSeed,
    ZeroVector,
)

__version__ = "0.1.0"

__all__ = [
    "CorruptSnapshot",
    "CycleDetected",
    "DepthExceeded",
    "DuplicateDocument",
    "EmptyGold",
    "EmptyIndex",
    "GeneratorFailure",
    "InfeasibleConstraints",
    "InvalidK",
    "InvalidPath",
    "MalformedDocument",
    "OrphanNode",
    "ProviderFailure",
    "UnknownDocument",
    "UnknownNode",
    "UnknownSeed",
    "ZeroVector",
]
