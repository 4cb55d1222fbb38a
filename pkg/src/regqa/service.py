"""HTTP service over immutable graph and index snapshots.

Endpoints:
  POST /ask         {"query": ...}            -> answer JSON
  POST /retrieve    {"query": ..., "k": ...}  -> assembled context JSON
  GET  /graph/stats                           -> node/edge/token counts
  GET  /healthz                               -> 200 "ok"

Malformed bodies yield 400; provider outages yield 503. The service
never mutates the snapshots it was started with.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from regqa.agents import QAEngine
from regqa.config import AppConfig
from regqa.errors import EmptyIndex, ProviderFailure
from regqa.graph import RegGraph


class AskBody(BaseModel):
    query: str


class RetrieveBody(BaseModel):
    query: str
    k: Optional[int] = None


def create_app(
    config: Optional[AppConfig] = None,
    engine: Optional[QAEngine] = None,
    graph: Optional[RegGraph] = None,
) -> FastAPI:
    """Build the service; pass an engine directly or let it load snapshots."""
    config = config or AppConfig()
    app = FastAPI(title="regqa")

    state = {"engine": engine, "graph": graph}

    def get_graph() -> RegGraph:
        if state["graph"] is None:
            if state["engine"] is not None:
                state["graph"] = state["engine"].graph
            else:
                state["graph"] = RegGraph.load(config.graph_path)
        return state["graph"]

    def get_engine() -> QAEngine:
        if state["engine"] is None:
            from regqa.retrieval import SearchIndex

            state["engine"] = QAEngine(
                graph=get_graph(),
                index=SearchIndex.load(config.index_path),
                embedder=config.make_embedder(),
                lm=config.make_lm(),
                retrieval_config=config.retrieval,
                propagation_config=config.propagation,
                agent_config=config.agents,
            )
        return state["engine"]

    @app.exception_handler(RequestValidationError)
    async def bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request body"})

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    @app.get("/graph/stats")
    async def graph_stats():
        return get_graph().stats().to_json()

    @app.post("/retrieve")
    async def retrieve(body: RetrieveBody):
        if not body.query.strip():
            return JSONResponse(status_code=400, content={"error": "empty query"})
        eng = get_engine()
        if body.k is not None:
            eng = QAEngine(
                graph=eng.graph,
                index=eng.index,
                embedder=eng.embedder,
                lm=eng.lm,
                retrieval_config=replace(eng.retrieval_config, k_seeds=body.k),
                propagation_config=eng.propagation_config,
                agent_config=eng.agent_config,
            )
        try:
            from regqa.agents import interpret

            cs = eng.pathfind(body.query, interpret(body.query))
            contexts = eng.assemble(cs)
        except ProviderFailure as exc:
            return JSONResponse(status_code=503, content={"error": str(exc)})
        except EmptyIndex as exc:
            return JSONResponse(status_code=503, content={"error": f"index unavailable: {exc}"})
        return {"contexts": contexts, "diagnostics": cs.diagnostics}

    @app.post("/ask")
    async def ask(body: AskBody):
        if not body.query.strip():
            return JSONResponse(status_code=400, content={"error": "empty query"})
        try:
            answer = get_engine().answer_query(body.query)
        except ProviderFailure as exc:
            return JSONResponse(status_code=503, content={"error": str(exc)})
        # the conductor converts provider outages into abstentions; surface them
        if answer.abstained and any(
            d.startswith("provider failure") for d in answer.diagnostics
        ):
            return JSONResponse(
                status_code=503, content={"error": "; ".join(answer.diagnostics)}
            )
        return answer.to_json()

    return app
