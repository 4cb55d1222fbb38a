"""The full question-answering pipeline, end to end and offline.

Interpreter routes the query, the pathfinder retrieves and propagates,
the deterministic template generator drafts an answer, and the auditor
verifies every sentence against the cited contexts. Non-regulatory
questions skip retrieval; questions with no supporting evidence abstain.
"""

from regqa.agents import QAEngine
from regqa.retrieval import HashedTfProvider, SearchIndex
from regqa.synth import generate_synthetic_corpus


def show(engine, query):
    answer = engine.answer_query(query)
    print(f"Q: {query}")
    print(f"A: {answer.text[:120]}{'...' if len(answer.text) > 120 else ''}")
    print(f"   abstained={answer.abstained} citations={len(answer.citations)}")
    if answer.diagnostics:
        print(f"   diagnostics: {answer.diagnostics}")
    print()


def main():
    corpus = generate_synthetic_corpus(n_chains=10, seed=2)
    provider = HashedTfProvider(dim=256)
    index = SearchIndex.build(
        corpus.graph.nodes(include_placeholders=False), provider
    )
    engine = QAEngine(corpus.graph, index, provider)

    show(engine, corpus.queries[0].query)          # regular regulatory query
    show(engine, "Hôm nay trời đẹp quá nhỉ?")       # chit-chat, no retrieval
    show(engine, corpus.queries[3].query)          # another chain


if __name__ == "__main__":
    main()
