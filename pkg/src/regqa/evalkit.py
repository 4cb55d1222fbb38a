"""Metrics, dataset statistics, and the benchmark runner.

Token F1 and Recall@k follow the usual QA definitions; the tokenizer is
lowercase whitespace splitting with punctuation stripped at token edges.
The benchmark runner drives any system exposing ``answer_query`` and
aggregates per hop level and overall, emitting machine-readable JSON and
an aligned text table.
"""

from __future__ import annotations

import json
import string
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol, Sequence

from regqa.dataset import QARecord
from regqa.errors import EmptyGold

_PUNCT = string.punctuation + "“”‘’…«»"


def eval_tokenize(text: str) -> list[str]:
    """Lowercase whitespace split; punctuation stripped at token edges."""
    out = []
    for raw in text.lower().split():
        token = raw.strip(_PUNCT)
        if token:
            out.append(token)
    return out


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def token_f1(prediction: str, gold: str) -> float:
    """Token-level F1 over lowercase tokens (multiset overlap)."""
    pred_tokens = eval_tokenize(prediction)
    gold_tokens = eval_tokenize(gold)
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def recall_at_k(gold_ids: set[str], retrieved_ids: Sequence[str], k: int) -> float:
    """Fraction of gold context ids among the first k retrieved."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not gold_ids:
        raise EmptyGold("gold id set is empty")
    top = set(retrieved_ids[:k])
    return len(gold_ids & top) / len(gold_ids)


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------

@dataclass
class LengthStats:
    min: int
    mean: float
    max: int

    @classmethod
    def of(cls, lengths: Sequence[int]) -> "LengthStats":
        return cls(min=min(lengths), mean=sum(lengths) / len(lengths), max=max(lengths))

    def to_json(self) -> dict:
        return {"min": self.min, "mean": round(self.mean, 1), "max": self.max}


def dataset_stats(
    records: Sequence[QARecord],
    context_text: Optional[Callable[[str], str]] = None,
) -> dict:
    """Per-hop and overall statistics of a QA dataset.

    For each hop level and for the full set: sample count, vocabulary
    size (distinct lowercase tokens over questions and answers), and
    min/mean/max token lengths of question, answer, and concatenated
    supporting contexts. ``context_text`` maps a context id to its text;
    without it, context lengths are reported as 0.
    """
    def row(subset: Sequence[QARecord]) -> dict:
        vocab: set[str] = set()
        q_lens, a_lens, c_lens = [], [], []
        for rec in subset:
            q_tokens = eval_tokenize(rec.query)
            a_tokens = eval_tokenize(rec.answer)
            vocab.update(q_tokens)
            vocab.update(a_tokens)
            q_lens.append(len(q_tokens))
            a_lens.append(len(a_tokens))
            if context_text is not None:
                joined = " ".join(context_text(cid) for cid in rec.context_ids)
                c_lens.append(len(eval_tokenize(joined)))
            else:
                c_lens.append(0)
        return {
            "samples": len(subset),
            "vocab": len(vocab),
            "question_length": LengthStats.of(q_lens).to_json(),
            "answer_length": LengthStats.of(a_lens).to_json(),
            "context_length": LengthStats.of(c_lens).to_json(),
        }

    hops = sorted({rec.number_of_hops for rec in records})
    return {
        "per_hop": {
            str(h): row([r for r in records if r.number_of_hops == h]) for h in hops
        },
        "all": row(records),
    }


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRecord:
    """One benchmark instance with its gold supporting contexts."""

    query: str
    gold_answer: str
    gold_context_ids: frozenset[str]
    hop: int

    def __post_init__(self):
        if not self.gold_context_ids:
            raise EmptyGold(f"no gold contexts for query {self.query!r}")

    @classmethod
    def from_qa_record(cls, rec: QARecord) -> "EvalRecord":
        return cls(
            query=rec.query,
            gold_answer=rec.answer,
            gold_context_ids=frozenset(rec.context_ids),
            hop=rec.number_of_hops,
        )


class QASystem(Protocol):
    """Anything with the engine's answer_query surface."""

    def answer_query(self, query: str):
        ...


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def run_benchmark(
    dataset: Iterable[EvalRecord],
    system: QASystem,
    k: int = 5,
) -> dict:
    """Evaluate a QA system record by record and aggregate per hop.

    Per record: token F1 of the answer, Recall@k of the retrieved context
    ids against the gold contexts, wall-clock latency, and prompt token
    count (whitespace tokens of the supplied contexts plus the query).
    Failing records score zero and carry a diagnostic; the run never
    aborts.
    """
    per_record: list[dict] = []
    for rec in dataset:
        entry = {
            "query": rec.query,
            "hop": rec.hop,
            "f1": 0.0,
            "recall_at_k": 0.0,
            "latency_s": 0.0,
            "prompt_tokens": 0,
            "abstained": False,
            "error": None,
        }
        start = time.perf_counter()
        try:
            answer = system.answer_query(rec.query)
            entry["latency_s"] = time.perf_counter() - start
            retrieved = list(answer.context_used.all)
            entry["f1"] = token_f1(answer.text, rec.gold_answer)
            entry["recall_at_k"] = recall_at_k(set(rec.gold_context_ids), retrieved, k)
            entry["abstained"] = bool(answer.abstained)
            entry["prompt_tokens"] = getattr(answer, "prompt_tokens", 0)
        except Exception as exc:  # noqa: BLE001 - per-record fault isolation
            entry["latency_s"] = time.perf_counter() - start
            entry["error"] = f"{type(exc).__name__}: {exc}"
        per_record.append(entry)

    def aggregate(rows: Sequence[dict]) -> dict:
        return {
            "count": len(rows),
            "f1": _mean([r["f1"] for r in rows]),
            "recall_at_k": _mean([r["recall_at_k"] for r in rows]),
            "latency_s": _mean([r["latency_s"] for r in rows]),
            "prompt_tokens": _mean([r["prompt_tokens"] for r in rows]),
        }

    hops = sorted({r["hop"] for r in per_record})
    report = {
        "k": k,
        "overall": aggregate(per_record),
        "per_hop": {
            str(h): aggregate([r for r in per_record if r["hop"] == h]) for h in hops
        },
        "records": per_record,
    }
    return report


def format_report_table(report: dict) -> str:
    """Aligned text table of a benchmark report (per-hop rows + overall)."""
    header = f"{'NoH':>4} {'N':>6} {'F1':>8} {'Recall@' + str(report['k']):>10} {'Latency(s)':>11} {'Tokens':>9}"
    lines = [header, "-" * len(header)]
    for hop, row in sorted(report["per_hop"].items(), key=lambda kv: int(kv[0])):
        lines.append(
            f"{hop:>4} {row['count']:>6} {row['f1']:>8.4f} "
            f"{row['recall_at_k']:>10.4f} {row['latency_s']:>11.4f} {row['prompt_tokens']:>9.1f}"
        )
    o = report["overall"]
    lines.append(
        f"{'All':>4} {o['count']:>6} {o['f1']:>8.4f} "
        f"{o['recall_at_k']:>10.4f} {o['latency_s']:>11.4f} {o['prompt_tokens']:>9.1f}"
    )
    return "\n".join(lines)


def format_stats_table(stats: dict) -> str:
    """Aligned text table of dataset statistics (per-hop rows + overall)."""
    def fmt_len(d: dict) -> str:
        return f"{d['min']} / {d['mean']} / {d['max']}"

    header = f"{'NoH':>4} {'NoS':>6} {'Vocab':>7} {'Question':>22} {'Answer':>22} {'Context':>24}"
    lines = [header, "-" * len(header)]
    for hop, row in sorted(stats["per_hop"].items(), key=lambda kv: int(kv[0])):
        lines.append(
            f"{hop:>4} {row['samples']:>6} {row['vocab']:>7} "
            f"{fmt_len(row['question_length']):>22} {fmt_len(row['answer_length']):>22} "
            f"{fmt_len(row['context_length']):>24}"
        )
    row = stats["all"]
    lines.append(
        f"{'All':>4} {row['samples']:>6} {row['vocab']:>7} "
        f"{fmt_len(row['question_length']):>22} {fmt_len(row['answer_length']):>22} "
        f"{fmt_len(row['context_length']):>24}"
    )
    return "\n".join(lines)


def save_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, indent=2)
