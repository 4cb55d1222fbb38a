"""Declarative application configuration.

One YAML file drives the CLI and the HTTP service; ``${VAR}`` references
are interpolated from the environment so secrets never live in the file.
Command-line flags override file values.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from regqa.agents import AgentConfig, HttpLMProvider, LMProvider, TemplateLMProvider
from regqa.propagation import PropagationConfig
from regqa.retrieval import (
    EmbeddingProvider,
    HashedTfProvider,
    HttpEmbeddingProvider,
    RetrievalConfig,
)

_ENV_RE = re.compile(r"\$\{([A-Z0-9_]+)\}")


def _interpolate(value):
    if isinstance(value, str):
        return _ENV_RE.sub(lambda m: os.environ.get(m.group(1), ""), value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


@dataclass
class AppConfig:
    corpus_path: str = "corpus.jsonl"
    graph_path: str = "snapshots/graph"
    index_path: str = "snapshots/index"
    rules_path: Optional[str] = None
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    agents: AgentConfig = field(default_factory=AgentConfig)
    embedding_provider: str = "offline"  # offline | http
    embedding_url: str = ""
    embedding_dim: int = 256
    lm_provider: str = "template"  # template | http
    lm_url: str = ""
    host: str = "127.0.0.1"
    port: int = 8000

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "AppConfig":
        if path is None:
            default = Path("regqa.yaml")
            if not default.exists():
                return cls()
            path = default
        raw = _interpolate(yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {})
        cfg = cls()
        for key in ("corpus_path", "graph_path", "index_path", "rules_path",
                    "embedding_provider", "embedding_url", "embedding_dim",
                    "lm_provider", "lm_url", "host", "port"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if "retrieval" in raw:
            cfg.retrieval = RetrievalConfig(**raw["retrieval"])
        if "propagation" in raw:
            cfg.propagation = PropagationConfig(**raw["propagation"])
        if "agents" in raw:
            cfg.agents = AgentConfig(**raw["agents"])
        return cfg

    def make_embedder(self) -> EmbeddingProvider:
        if self.embedding_provider == "http":
            return HttpEmbeddingProvider(self.embedding_url, dim=self.embedding_dim)
        return HashedTfProvider(dim=self.embedding_dim)

    def make_lm(self) -> LMProvider:
        if self.lm_provider == "http":
            return HttpLMProvider(self.lm_url)
        return TemplateLMProvider()
