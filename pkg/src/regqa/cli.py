"""Command-line interface over the full pipeline.

Subcommands: ingest, graph build|stats, index build, ask, retrieve,
sample, validate, stats, eval, serve. Output is JSON on stdout unless
``--table`` is passed. Exit codes: 0 success, 1 usage error, 2 data
error. Randomized commands require an explicit --seed so dataset runs
stay reproducible.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from regqa.agents import QAEngine, interpret
from regqa.config import AppConfig
from regqa.corpus import (
    ContextTriple,
    extract_relation_mentions,
    load_corpus,
    load_rules,
    parse_document,
)
from regqa.dataset import (
    SamplerConfig,
    TemplateQAGenerator,
    default_cluster_count,
    generate_qa,
    load_records,
    normalize_embeddings,
    sample_tuples,
    select_representatives,
    spherical_kmeans,
    validate_record,
)
from regqa.errors import CorruptSnapshot, RegQAError
from regqa.evalkit import (
    EvalRecord,
    dataset_stats,
    format_report_table,
    format_stats_table,
    run_benchmark,
)
from regqa.graph import RegGraph
from regqa.retrieval import SearchIndex


class DataError(click.ClickException):
    exit_code = 2


def _emit(ctx, payload: dict, table: str | None = None) -> None:
    if ctx.obj.get("table") and table is not None:
        click.echo(table)
    else:
        click.echo(json.dumps(payload, ensure_ascii=False, indent=2))


def _load_graph(cfg: AppConfig) -> RegGraph:
    path = Path(cfg.graph_path)
    if not (path / "nodes.jsonl").exists():
        return RegGraph()
    return RegGraph.load(path)


def _load_index(cfg: AppConfig) -> SearchIndex:
    try:
        return SearchIndex.load(cfg.index_path)
    except (CorruptSnapshot, FileNotFoundError) as exc:
        raise DataError(f"index not built: {exc}") from exc


def _make_engine(cfg: AppConfig, **agent_overrides) -> QAEngine:
    from dataclasses import replace

    graph = _load_graph(cfg)
    index = _load_index(cfg)
    agents_cfg = replace(cfg.agents, **agent_overrides) if agent_overrides else cfg.agents
    return QAEngine(
        graph=graph,
        index=index,
        embedder=cfg.make_embedder(),
        lm=cfg.make_lm(),
        retrieval_config=cfg.retrieval,
        propagation_config=cfg.propagation,
        agent_config=agents_cfg,
    )


def _graph_contexts(graph: RegGraph) -> list[ContextTriple]:
    out = []
    for node in graph.nodes(include_placeholders=False):
        if not node.text.strip():
            continue
        title = node.meta.title if node.meta else ""
        out.append(ContextTriple(id=node.id, title=title or node.id.split("::")[0], text=node.text))
    return out


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Config file (YAML).")
@click.option("--table", is_flag=True, help="Text table output instead of JSON.")
@click.pass_context
def cli(ctx, config_path, table):
    ctx.ensure_object(dict)
    ctx.obj["config"] = AppConfig.load(config_path)
    ctx.obj["table"] = table


@cli.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.pass_context
def ingest(ctx, corpus):
    """Parse a corpus and build the graph snapshot."""
    cfg = ctx.obj["config"]
    rules = load_rules(cfg.rules_path) if cfg.rules_path else None
    graph = _load_graph(cfg)
    reports = []
    try:
        for doc in load_corpus(corpus):
            units = parse_document(doc.text, doc.meta)
            mentions = [m for u in units for m in extract_relation_mentions(u, rules)]
            rep = graph.ingest_document(units, mentions, meta=doc.meta)
            reports.append(
                {
                    "doc_id": rep.doc_id,
                    "nodes_added": rep.nodes_added,
                    "edges_added": rep.edges_added,
                    "placeholders_created": rep.placeholders_created,
                    "placeholders_resolved": rep.placeholders_resolved,
                    "already_ingested": rep.already_ingested,
                }
            )
    except RegQAError as exc:
        raise DataError(str(exc)) from exc
    graph.save(cfg.graph_path)
    _emit(ctx, {"ingested": reports, "stats": graph.stats().to_json()})


@cli.group(name="graph")
def graph_group():
    """Graph snapshot operations."""


@graph_group.command("build")
@click.pass_context
def graph_build(ctx):
    """Build the graph from the configured corpus path."""
    cfg = ctx.obj["config"]
    if not Path(cfg.corpus_path).exists():
        raise DataError(f"corpus not found: {cfg.corpus_path}")
    ctx.invoke(ingest, corpus=cfg.corpus_path)


@graph_group.command("stats")
@click.pass_context
def graph_stats(ctx):
    """Node, edge and token counts of the graph snapshot."""
    cfg = ctx.obj["config"]
    stats = _load_graph(cfg).stats()
    _emit(
        ctx,
        stats.to_json(),
        table=f"nodes {stats.node_count}  edges {stats.edge_count}  graph_tokens {stats.graph_tokens}",
    )


@cli.group(name="index")
def index_group():
    """Retrieval index operations."""


@index_group.command("build")
@click.pass_context
def index_build(ctx):
    """Build the sparse+dense index over non-placeholder graph nodes."""
    cfg = ctx.obj["config"]
    graph = _load_graph(cfg)
    try:
        index = SearchIndex.build(graph.nodes(include_placeholders=False), cfg.make_embedder())
    except RegQAError as exc:
        raise DataError(str(exc)) from exc
    index.save(cfg.index_path)
    _emit(ctx, {"indexed_nodes": len(index.node_ids), "dim": index.dim})


@cli.command()
@click.argument("question")
@click.pass_context
def ask(ctx, question):
    """Answer a question through the full agent pipeline."""
    cfg = ctx.obj["config"]
    engine = _make_engine(cfg)
    answer = engine.answer_query(question)
    _emit(ctx, answer.to_json(), table=answer.text)


@cli.command()
@click.argument("question")
@click.option("--k", type=int, default=None, help="Seed count override.")
@click.pass_context
def retrieve(ctx, question, k):
    """Retrieve and assemble the evidence context for a question."""
    from dataclasses import replace

    cfg = ctx.obj["config"]
    if k is not None:
        cfg.retrieval = replace(cfg.retrieval, k_seeds=k)
    engine = _make_engine(cfg)
    cs = engine.pathfind(question, interpret(question))
    contexts = engine.assemble(cs)
    _emit(ctx, {"contexts": contexts, "diagnostics": cs.diagnostics})


@cli.command()
@click.option("--hop", type=int, required=True)
@click.option("--tau", type=float, required=True)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, required=True, help="Explicit RNG seed (no wall-clock default).")
@click.option("--reps-per-cluster", type=int, default=5)
@click.option("--out", type=click.Path(), default=None, help="Write records JSONL here.")
@click.pass_context
def sample(ctx, hop, tau, count, seed, reps_per_cluster, out):
    """Cluster contexts, sample constrained tuples, emit QA records."""
    cfg = ctx.obj["config"]
    graph = _load_graph(cfg)
    contexts = _graph_contexts(graph)
    if not contexts:
        raise DataError("graph snapshot empty; run ingest first")

    embedder = cfg.make_embedder()
    vectors = normalize_embeddings(embedder.embed([c.text for c in contexts]))
    ids = [c.id for c in contexts]
    k = min(default_cluster_count(len(contexts)), len(contexts))
    clusters = spherical_kmeans(vectors, k, seed=seed, ids=ids)
    rep_ids: set[str] = set()
    for cluster in clusters:
        rep_ids.update(select_representatives(cluster, reps_per_cluster, vectors))
    reps = [c for c in contexts if c.id in rep_ids]

    try:
        config = SamplerConfig(hop=hop, tau=tau, count=count, seed=seed,
                               representatives_per_cluster=reps_per_cluster)
        tuples = sample_tuples(reps, config)
    except RegQAError as exc:
        raise DataError(str(exc)) from exc

    generator = TemplateQAGenerator()
    records = [generate_qa(t, reps, generator) for t in tuples]
    if out:
        from regqa.dataset import save_records

        save_records(records, out)
    _emit(ctx, {"sampled": len(records), "records": [r.to_json() for r in records]})


@cli.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.pass_context
def validate(ctx, dataset):
    """Structurally validate dataset records against the graph corpus."""
    cfg = ctx.obj["config"]
    graph = _load_graph(cfg)
    corpus = {c.id: c for c in _graph_contexts(graph)}
    try:
        records = load_records(dataset)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse dataset: {exc}") from exc
    failures = []
    for i, rec in enumerate(records):
        violations = validate_record(rec, corpus)
        if violations:
            failures.append({"index": i, "query": rec.query, "violations": violations})
    _emit(ctx, {"records": len(records), "failing": len(failures), "failures": failures})


@cli.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--contexts", "contexts_path", type=click.Path(exists=True), default=None,
              help="JSONL of {id, title, text} context triples for length stats.")
@click.pass_context
def stats(ctx, dataset, contexts_path):
    """Per-hop dataset statistics (samples, vocabulary, lengths)."""
    cfg = ctx.obj["config"]
    try:
        records = load_records(dataset)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse dataset: {exc}") from exc
    if not records:
        raise DataError("dataset is empty")

    lookup = {}
    if contexts_path:
        with open(contexts_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    lookup[rec["id"]] = rec["text"]
    else:
        graph = _load_graph(cfg)
        lookup = {c.id: c.text for c in _graph_contexts(graph)}

    result = dataset_stats(records, context_text=lambda cid: lookup.get(cid, ""))
    _emit(ctx, result, table=format_stats_table(result))


@cli.command(name="eval")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--k", type=int, default=5)
@click.option("--no-interpreter", is_flag=True, help="Ablation: treat every query as regulatory.")
@click.option("--no-auditor", is_flag=True, help="Ablation: skip grounding verification.")
@click.option("--no-propagation", is_flag=True, help="Ablation: flat hybrid retrieval only.")
@click.option("--out", type=click.Path(), default=None, help="Write the JSON report here.")
@click.pass_context
def eval_cmd(ctx, dataset, k, no_interpreter, no_auditor, no_propagation, out):
    """Benchmark the pipeline (optionally ablated) on a dataset."""
    cfg = ctx.obj["config"]
    try:
        records = load_records(dataset)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse dataset: {exc}") from exc
    engine = _make_engine(
        cfg,
        use_interpreter=not no_interpreter,
        use_auditor=not no_auditor,
        use_propagation=not no_propagation,
    )
    eval_records = [EvalRecord.from_qa_record(r) for r in records]
    report = run_benchmark(eval_records, engine, k=k)
    if out:
        from regqa.evalkit import save_report

        save_report(report, out)
    _emit(ctx, report, table=format_report_table(report))


@cli.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.pass_context
def serve(ctx, port, host):
    """Start the HTTP service over the configured snapshots."""
    import uvicorn

    from regqa.service import create_app

    cfg = ctx.obj["config"]
    app = create_app(cfg)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port)


def main(argv=None) -> int:
    try:
        cli(args=argv, standalone_mode=False, obj={})
        return 0
    except DataError as exc:
        click.echo(json.dumps({"error": exc.message}), err=True)
        return 2
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_help(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except RegQAError as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
