"""Answer and retrieval metrics, dataset statistics, benchmark runner."""

import json

import pytest
from hypothesis import given, strategies as st

from regqa.dataset import QARecord
from regqa.errors import EmptyGold
from regqa.evalkit import (
    EvalRecord,
    dataset_stats,
    eval_tokenize,
    format_report_table,
    format_stats_table,
    recall_at_k,
    run_benchmark,
    save_report,
    token_f1,
)


class TestEvalTokenize:
    def test_lowercase_and_punct_stripped(self):
        assert eval_tokenize("Giá KHÁM, bệnh.") == ["giá", "khám", "bệnh"]

    def test_empty(self):
        assert eval_tokenize("") == []
        assert eval_tokenize("... !!!") == []


class TestTokenF1:
    def test_exact_match(self):
        assert token_f1("ba trăm nghìn đồng", "ba trăm nghìn đồng") == 1.0

    def test_no_overlap(self):
        assert token_f1("alpha beta", "gamma delta") == 0.0

    def test_hand_computed_partial(self):
        # pred 4 tokens, gold 2, overlap 2: p=0.5, r=1.0, f1=2/3
        assert token_f1("a b c d", "a b") == pytest.approx(2 / 3)

    def test_multiset_counting(self):
        # pred "a a", gold "a": overlap 1, p=0.5, r=1.0, f1=2/3
        assert token_f1("a a", "a") == pytest.approx(2 / 3)

    def test_symmetric(self):
        pairs = [("a b c", "b c d"), ("x", "x y"), ("m n", "n")]
        for p, g in pairs:
            assert token_f1(p, g) == pytest.approx(token_f1(g, p))

    def test_empty_operands(self):
        assert token_f1("", "a") == 0.0
        assert token_f1("a", "") == 0.0

    @given(st.text(alphabet="abc ", max_size=40), st.text(alphabet="abc ", max_size=40))
    def test_bounded_and_case_insensitive(self, p, g):
        f1 = token_f1(p, g)
        assert 0.0 <= f1 <= 1.0
        assert f1 == pytest.approx(token_f1(p.upper(), g.upper()))

    def test_identity_gives_one(self):
        s = "khoản hai điều ba thông tư"
        assert token_f1(s, s) == 1.0


class TestRecallAtK:
    def test_fixture_values(self):
        gold = {"a", "b", "c", "d"}
        retrieved = ["a", "x", "b", "y", "c", "d"]
        assert recall_at_k(gold, retrieved, 1) == 0.25
        assert recall_at_k(gold, retrieved, 3) == 0.5
        assert recall_at_k(gold, retrieved, 6) == 1.0

    def test_monotone_in_k(self):
        gold = {"a", "b", "c"}
        retrieved = ["x", "a", "y", "b", "c"]
        values = [recall_at_k(gold, retrieved, k) for k in range(1, 8)]
        assert values == sorted(values)

    def test_duplicates_not_double_counted(self):
        assert recall_at_k({"a", "b"}, ["a", "a", "a"], 3) == 0.5

    def test_empty_gold_raises(self):
        with pytest.raises(EmptyGold):
            recall_at_k(set(), ["a"], 1)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            recall_at_k({"a"}, ["a"], 0)


# ---------------------------------------------------------------------------
# dataset statistics
# ---------------------------------------------------------------------------

def rec(query, answer, hops, ctx_ids):
    return QARecord(
        query=query,
        answer=answer,
        number_of_hops=hops,
        context_ids=list(ctx_ids),
        evidence={f"context_{i}": "x" for i in range(1, hops + 1)},
        reasoning=" ".join(f"context_{i}" for i in range(1, hops + 1)),
    )


class TestDatasetStats:
    def records(self):
        return [
            rec("một hai ba", "bốn năm", 1, ["c1"]),
            rec("một hai ba bốn năm sáu", "bảy", 1, ["c2"]),
            rec("tám chín", "mười mười một mười hai", 2, ["c1", "c2"]),
        ]

    def test_hand_counted(self):
        ctx = {"c1": "alpha beta", "c2": "gamma delta epsilon"}
        stats = dataset_stats(self.records(), context_text=lambda cid: ctx[cid])
        h1 = stats["per_hop"]["1"]
        assert h1["samples"] == 2
        assert h1["question_length"] == {"min": 3, "mean": 4.5, "max": 6}
        assert h1["answer_length"] == {"min": 1, "mean": 1.5, "max": 2}
        h2 = stats["per_hop"]["2"]
        assert h2["samples"] == 1
        assert h2["context_length"] == {"min": 5, "mean": 5.0, "max": 5}
        assert stats["all"]["samples"] == 3

    def test_vocab_counts_distinct_tokens(self):
        records = [rec("a b a", "b c", 1, ["c1"])]
        stats = dataset_stats(records)
        assert stats["all"]["vocab"] == 3

    def test_vocab_invariant_under_duplication(self):
        records = self.records()
        doubled = records + [
            rec(r.query, r.answer, r.number_of_hops, r.context_ids) for r in records
        ]
        a = dataset_stats(records)["all"]["vocab"]
        b = dataset_stats(doubled)["all"]["vocab"]
        assert a == b

    def test_without_context_callable_lengths_zero(self):
        stats = dataset_stats(self.records())
        assert stats["all"]["context_length"] == {"min": 0, "mean": 0.0, "max": 0}

    def test_all_row_reaggregates(self):
        stats = dataset_stats(self.records())
        per_hop_n = sum(r["samples"] for r in stats["per_hop"].values())
        assert per_hop_n == stats["all"]["samples"]

    def test_table_renders(self):
        table = format_stats_table(dataset_stats(self.records()))
        assert "NoS" in table and "All" in table
        assert len({len(l) for l in table.splitlines()[2:]}) <= 2  # aligned rows


# ---------------------------------------------------------------------------
# benchmark runner
# ---------------------------------------------------------------------------

class _Answer:
    def __init__(self, text, retrieved, abstained=False, prompt_tokens=7):
        self.text = text
        self.abstained = abstained
        self.prompt_tokens = prompt_tokens
        self.context_used = type("CS", (), {"all": retrieved})()


class OracleSystem:
    """Returns the gold answer and exactly the gold contexts."""

    def __init__(self, dataset):
        self.by_query = {r.query: r for r in dataset}

    def answer_query(self, query):
        gold = self.by_query[query]
        return _Answer(gold.gold_answer, sorted(gold.gold_context_ids))


class NullSystem:
    def answer_query(self, query):
        return _Answer("", [], abstained=True, prompt_tokens=0)


class CrashingSystem:
    def answer_query(self, query):
        raise RuntimeError("boom")


def make_dataset():
    return [
        EvalRecord("q một?", "đáp án một", frozenset({"c1"}), hop=1),
        EvalRecord("q hai?", "đáp án hai ba", frozenset({"c1", "c2"}), hop=2),
        EvalRecord("q ba?", "đáp án bốn", frozenset({"c3"}), hop=1),
    ]


class TestRunBenchmark:
    def test_oracle_scores_one(self):
        ds = make_dataset()
        report = run_benchmark(ds, OracleSystem(ds), k=5)
        assert report["overall"]["f1"] == pytest.approx(1.0)
        assert report["overall"]["recall_at_k"] == pytest.approx(1.0)

    def test_null_scores_zero(self):
        ds = make_dataset()
        report = run_benchmark(ds, NullSystem(), k=5)
        assert report["overall"]["f1"] == 0.0
        assert report["overall"]["recall_at_k"] == 0.0
        assert all(r["abstained"] for r in report["records"])

    def test_per_hop_reaggregation_oracle(self):
        ds = make_dataset()
        report = run_benchmark(ds, OracleSystem(ds), k=5)
        # overall mean must equal the count-weighted mean of per-hop rows
        for metric in ("f1", "recall_at_k", "prompt_tokens"):
            weighted = sum(
                row[metric] * row["count"] for row in report["per_hop"].values()
            )
            assert report["overall"][metric] == pytest.approx(
                weighted / report["overall"]["count"]
            )

    def test_crash_isolated_per_record(self):
        ds = make_dataset()
        report = run_benchmark(ds, CrashingSystem(), k=5)
        assert report["overall"]["count"] == 3
        assert all(r["error"] is not None for r in report["records"])
        assert report["overall"]["f1"] == 0.0

    def test_report_shape(self):
        ds = make_dataset()
        report = run_benchmark(ds, OracleSystem(ds), k=2)
        assert report["k"] == 2
        assert set(report["per_hop"]) == {"1", "2"}
        assert report["per_hop"]["1"]["count"] == 2

    def test_report_table_and_save(self, tmp_path):
        ds = make_dataset()
        report = run_benchmark(ds, OracleSystem(ds), k=5)
        table = format_report_table(report)
        assert "NoH" in table and "All" in table
        out = tmp_path / "report.json"
        save_report(report, out)
        assert json.loads(out.read_text(encoding="utf-8"))["k"] == 5


class TestEvalRecord:
    def test_from_qa_record(self):
        r = rec("q?", "a", 2, ["c1", "c2"])
        er = EvalRecord.from_qa_record(r)
        assert er.hop == 2 and er.gold_context_ids == frozenset({"c1", "c2"})

    def test_empty_gold_rejected(self):
        with pytest.raises(EmptyGold):
            EvalRecord("q", "a", frozenset(), hop=1)
