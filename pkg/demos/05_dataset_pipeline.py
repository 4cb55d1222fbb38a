"""Build a small multihop QA dataset from graph contexts.

Embed, cluster, pick representatives, sample constrained tuples, then
generate and validate extractive QA records and split them by hop count.
"""

from regqa.corpus import ContextTriple
from regqa.dataset import (
    SamplerConfig,
    default_cluster_count,
    generate_qa,
    normalize_embeddings,
    sample_tuples,
    select_representatives,
    spherical_kmeans,
    split_dataset,
    validate_record,
)
from regqa.retrieval import HashedTfProvider
from regqa.synth import generate_synthetic_corpus


def main():
    corpus = generate_synthetic_corpus(n_chains=20, seed=0)
    contexts = [
        ContextTriple(
            id=n.id,
            title=n.meta.title if n.meta else n.id,
            text=n.text,
        )
        for n in corpus.graph.nodes(include_placeholders=False)
        if n.text.strip()
    ]
    print(f"{len(contexts)} context units")

    provider = HashedTfProvider(dim=256)
    vectors = normalize_embeddings(provider.embed([c.text for c in contexts]))
    k = default_cluster_count(len(contexts))
    clusters = spherical_kmeans(vectors, k, seed=0, ids=[c.id for c in contexts])
    print(f"{k} clusters, sizes {[len(c.members) for c in clusters]}")

    rep_ids = set()
    for cluster in clusters:
        rep_ids.update(select_representatives(cluster, 5, vectors))
    reps = [c for c in contexts if c.id in rep_ids]
    print(f"{len(reps)} representative contexts")

    records = []
    for hop in (2, 3):
        cfg = SamplerConfig(hop=hop, tau=0.5, count=5, seed=hop)
        for t in sample_tuples(reps, cfg):
            records.append(generate_qa(t, reps))
    print(f"{len(records)} QA records generated")

    corpus_by_id = {c.id: c for c in reps}
    bad = sum(1 for r in records if validate_record(r, corpus_by_id))
    print(f"validator failures: {bad}")

    train, test = split_dataset(records, test_fraction=0.3, seed=0)
    print(f"split: {len(train)} train / {len(test)} test")
    print("\nexample record:")
    rec = records[0]
    print(f"  query:  {rec.query[:90]}...")
    print(f"  hops:   {rec.number_of_hops}")
    print(f"  answer: {rec.answer[:90]}...")


if __name__ == "__main__":
    main()
