"""Parse two regulation texts and build the typed graph.

The second document amends the first; its citation becomes a typed edge
and the graph can tell us which provision is legally applicable.
"""

from regqa.corpus import DocMeta, extract_relation_mentions, parse_document
from regqa.graph import RegGraph

OLD = DocMeta(doc_id="15/2020/TT-BYT", title="Thông tư về giá dịch vụ khám bệnh")
NEW = DocMeta(doc_id="21/2023/TT-BYT", title="Thông tư sửa đổi giá dịch vụ")

OLD_TEXT = """\
Điều 1. Phạm vi điều chỉnh
1. Thông tư này quy định giá dịch vụ khám bệnh.
2. Áp dụng cho cơ sở y tế công lập.
Điều 2. Mức giá
1. Giá khám bệnh là hai trăm nghìn đồng.
"""

NEW_TEXT = """\
Điều 1. Sửa đổi Khoản 1 Điều 2 Thông tư 15/2020/TT-BYT như sau: giá khám bệnh là ba trăm nghìn đồng.
"""


def main():
    graph = RegGraph()
    for meta, text in ((OLD, OLD_TEXT), (NEW, NEW_TEXT)):
        units = parse_document(text, meta)
        mentions = [m for u in units for m in extract_relation_mentions(u)]
        report = graph.ingest_document(units, mentions, meta=meta)
        print(f"ingested {meta.doc_id}: "
              f"{report.nodes_added} nodes, {report.edges_added} edges")

    print("\nall nodes:")
    for node in sorted(graph.nodes(), key=lambda n: n.id):
        print(f"  {node.id:30s} [{node.kind}]")

    old_clause = "15/2020/TT-BYT::Đ2::K1"
    terminals, chain = graph.trace_validity(old_clause)
    print(f"\nvalidity trace from {old_clause}:")
    print(f"  applicable provision(s): {sorted(terminals)}")
    for edge in chain:
        print(f"  via edge {edge.src} --{edge.relation}--> {edge.dst}")


if __name__ == "__main__":
    main()
