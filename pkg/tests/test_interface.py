"""Command-line and HTTP surfaces: exit codes, payloads, parity."""

import json

import pytest
from fastapi.testclient import TestClient

from regqa.cli import main
from regqa.config import AppConfig
from regqa.errors import ProviderFailure
from regqa.graph import RegGraph
from regqa.retrieval import SearchIndex
from regqa.service import create_app

QUERY = "Quy định tiêu chuẩn kamo trivel sunbo là gì?"
GOLD_TERMINAL = "10/2023/TT-BYT::Đ1"

DOCS = [
    {
        "id": "10/2020/TT-BYT",
        "title": "Thông tư gốc",
        "text": "Điều 1. Tiêu chuẩn kamo trivel sunbo áp dụng.",
        "meta": {"doc_id": "10/2020/TT-BYT", "promulgated": "2020-01-01"},
    },
    {
        "id": "10/2023/TT-BYT",
        "title": "Thông tư cập nhật",
        "text": "Điều 1. Sửa đổi Điều 1 Thông tư 10/2020/TT-BYT thành: xelan phidur mobo.",
        "meta": {"doc_id": "10/2023/TT-BYT", "promulgated": "2023-06-01"},
    },
] + [
    {
        "id": f"{20 + i}/2021/TT-BYT",
        "title": f"Thông tư chuyên đề {i}",
        "text": f"Điều 1. Nội dung chuyên đề riêng {i} "
        + " ".join(f"tm{i}{j}" for j in range(10))
        + ".",
        "meta": {"doc_id": f"{20 + i}/2021/TT-BYT", "promulgated": "2021-05-01"},
    }
    for i in range(6)
]


@pytest.fixture
def workspace(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text(
        "\n".join(json.dumps(d, ensure_ascii=False) for d in DOCS), encoding="utf-8"
    )
    config = tmp_path / "regqa.yaml"
    config.write_text(
        f"corpus_path: {corpus}\n"
        f"graph_path: {tmp_path / 'graph'}\n"
        f"index_path: {tmp_path / 'index'}\n",
        encoding="utf-8",
    )
    return tmp_path


def run(workspace, *args):
    return main(["--config", str(workspace / "regqa.yaml"), *args])


def run_json(workspace, capsys, *args):
    code = run(workspace, *args)
    out = capsys.readouterr().out
    return code, json.loads(out)


def build_snapshots(workspace, capsys):
    assert run(workspace, "ingest", str(workspace / "corpus.jsonl")) == 0
    assert run(workspace, "index", "build") == 0
    capsys.readouterr()


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

class TestCliExitCodes:
    def test_graph_stats_on_empty_store_is_zeros(self, workspace, capsys):
        code, payload = run_json(workspace, capsys, "graph", "stats")
        assert code == 0
        assert payload["nodes"] == 0 and payload["edges"] == 0

    def test_ask_before_index_build_is_data_error(self, workspace, capsys):
        code = run(workspace, "ask", QUERY)
        assert code == 2
        assert "index not built" in capsys.readouterr().err

    def test_missing_required_option_is_usage_error(self, workspace, capsys):
        code = run(workspace, "sample", "--hop", "2", "--tau", "0.5", "--count", "3")
        assert code == 1
        assert "--seed" in capsys.readouterr().err

    def test_unknown_subcommand_is_usage_error(self, workspace, capsys):
        assert run(workspace, "frobnicate") == 1

    def test_validate_on_garbage_file_is_data_error(self, workspace, capsys):
        bad = workspace / "bad.jsonl"
        bad.write_text("{not json", encoding="utf-8")
        assert run(workspace, "validate", str(bad)) == 2


class TestCliPipeline:
    def test_ingest_reports_and_persists(self, workspace, capsys):
        code, payload = run_json(
            workspace, capsys, "ingest", str(workspace / "corpus.jsonl")
        )
        assert code == 0
        assert len(payload["ingested"]) == len(DOCS)
        assert payload["stats"]["nodes"] > 0
        assert (workspace / "graph" / "nodes.jsonl").exists()

    def test_index_build_counts_nodes(self, workspace, capsys):
        run(workspace, "ingest", str(workspace / "corpus.jsonl"))
        capsys.readouterr()
        code, payload = run_json(workspace, capsys, "index", "build")
        assert code == 0
        graph = RegGraph.load(workspace / "graph")
        assert payload["indexed_nodes"] == len(
            [n for n in graph.nodes(include_placeholders=False)]
        )

    def test_ask_end_to_end(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        code, payload = run_json(workspace, capsys, "ask", QUERY)
        assert code == 0
        assert not payload["abstained"]
        assert GOLD_TERMINAL in payload["context_ids"]
        assert set(payload["citations"]) <= set(payload["context_ids"])

    def test_ask_table_output_is_plain_text(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        code = run(workspace, "--table", "ask", QUERY)
        out = capsys.readouterr().out
        assert code == 0
        with pytest.raises(json.JSONDecodeError):
            json.loads(out)

    def test_retrieve_k_override(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        code, payload = run_json(workspace, capsys, "retrieve", "--k", "2", QUERY)
        assert code == 0
        ids = [c["id"] for c in payload["contexts"]]
        assert GOLD_TERMINAL in ids

    def test_sample_validate_stats_eval_flow(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        out_path = workspace / "ds.jsonl"
        code, payload = run_json(
            workspace, capsys, "sample",
            "--hop", "2", "--tau", "0.5", "--count", "4",
            "--seed", "0", "--out", str(out_path),
        )
        assert code == 0 and payload["sampled"] >= 1
        assert out_path.exists()

        code, payload = run_json(workspace, capsys, "validate", str(out_path))
        assert code == 0 and payload["failing"] == 0

        code, payload = run_json(workspace, capsys, "stats", str(out_path))
        assert code == 0
        assert payload["all"]["samples"] == sum(
            r["samples"] for r in payload["per_hop"].values()
        )

        report_path = workspace / "report.json"
        code, payload = run_json(
            workspace, capsys, "eval", str(out_path), "--k", "5",
            "--out", str(report_path),
        )
        assert code == 0
        assert payload["overall"]["count"] >= 1
        assert report_path.exists()

    def test_validate_flags_planted_hop_mismatch(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        out_path = workspace / "ds.jsonl"
        run(
            workspace, "sample", "--hop", "2", "--tau", "0.5",
            "--count", "3", "--seed", "1", "--out", str(out_path),
        )
        capsys.readouterr()
        lines = out_path.read_text(encoding="utf-8").splitlines()
        first = json.loads(lines[0])
        first["number_of_hops"] = 5
        lines[0] = json.dumps(first, ensure_ascii=False)
        out_path.write_text("\n".join(lines), encoding="utf-8")

        code, payload = run_json(workspace, capsys, "validate", str(out_path))
        assert code == 0
        assert payload["failing"] >= 1
        assert any(
            "hop-evidence-mismatch" in f["violations"] for f in payload["failures"]
        )

    def test_sample_deterministic_for_seed(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        a = workspace / "a.jsonl"
        b = workspace / "b.jsonl"
        for out in (a, b):
            run(
                workspace, "sample", "--hop", "2", "--tau", "0.5",
                "--count", "3", "--seed", "7", "--out", str(out),
            )
            capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# HTTP service
# ---------------------------------------------------------------------------

@pytest.fixture
def client(workspace, capsys):
    build_snapshots(workspace, capsys)
    config = AppConfig.load(workspace / "regqa.yaml")
    return TestClient(create_app(config))


class TestHttpService:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200 and resp.text == "ok"

    def test_graph_stats_matches_snapshot(self, client, workspace):
        resp = client.get("/graph/stats")
        assert resp.status_code == 200
        direct = RegGraph.load(workspace / "graph").stats().to_json()
        assert resp.json() == direct

    def test_ask(self, client):
        resp = client.post("/ask", json={"query": QUERY})
        assert resp.status_code == 200
        body = resp.json()
        assert not body["abstained"]
        assert GOLD_TERMINAL in body["context_ids"]

    def test_ask_empty_query_is_400(self, client):
        assert client.post("/ask", json={"query": "  "}).status_code == 400

    def test_malformed_body_is_400(self, client):
        assert client.post("/ask", json={"q": "x"}).status_code == 400
        assert client.post("/retrieve", json={}).status_code == 400

    def test_retrieve_parity_with_cli(self, client, workspace, capsys):
        _, cli_payload = run_json(workspace, capsys, "retrieve", "--k", "3", QUERY)
        resp = client.post("/retrieve", json={"query": QUERY, "k": 3})
        assert resp.status_code == 200
        cli_ids = [c["id"] for c in cli_payload["contexts"]]
        http_ids = [c["id"] for c in resp.json()["contexts"]]
        assert cli_ids == http_ids

    def test_provider_outage_is_503(self, workspace, capsys):
        build_snapshots(workspace, capsys)
        config = AppConfig.load(workspace / "regqa.yaml")

        class BrokenEmbedder:
            dim = 256

            def embed(self, texts):
                raise ProviderFailure("embedding endpoint down")

        from regqa.agents import QAEngine

        graph = RegGraph.load(workspace / "graph")
        index = SearchIndex.load(workspace / "index")
        engine = QAEngine(graph, index, BrokenEmbedder())
        app = create_app(config, engine=engine, graph=graph)
        broken = TestClient(app)
        assert broken.post("/retrieve", json={"query": QUERY}).status_code == 503
        assert broken.post("/ask", json={"query": QUERY}).status_code == 503
