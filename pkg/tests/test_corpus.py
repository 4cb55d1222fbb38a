"""Parser, identifier scheme, and relation-mention extraction."""

import unicodedata

import pytest
from hypothesis import given, strategies as st

from regqa.corpus import (
    DocMeta,
    UnitPath,
    extract_relation_mentions,
    load_rules,
    make_unit_id,
    normalize_text,
    parse_document,
)
from regqa.errors import InvalidPath, MalformedDocument

META = DocMeta(doc_id="15/2023/TT-BYT", title="Thông tư thử nghiệm")


class TestNormalizeText:
    def test_whitespace_collapse(self):
        assert normalize_text("  Điều  1. ") == "Điều 1."

    def test_empty(self):
        assert normalize_text("") == ""

    def test_nfc_composition(self):
        decomposed = unicodedata.normalize("NFD", "Điều bổ sung")
        expected = unicodedata.normalize("NFC", decomposed)
        assert normalize_text(decomposed) == expected

    def test_control_chars_removed(self):
        assert normalize_text("a\x00b\x07c") == "abc"

    @given(st.text(max_size=200))
    def test_idempotent(self, raw):
        once = normalize_text(raw)
        assert normalize_text(once) == once


class TestMakeUnitId:
    def test_document(self):
        assert make_unit_id("15/2023/TT-BYT", UnitPath()) == "15/2023/TT-BYT::D"

    def test_article(self):
        assert make_unit_id("15/2023/TT-BYT", UnitPath(article=4)) == "15/2023/TT-BYT::Đ4"

    def test_clause(self):
        assert (
            make_unit_id("15/2023/TT-BYT", UnitPath(article=4, clause=2))
            == "15/2023/TT-BYT::Đ4::K2"
        )

    def test_non_positive_ordinals(self):
        with pytest.raises(InvalidPath):
            make_unit_id("A", UnitPath(article=0))
        with pytest.raises(InvalidPath):
            make_unit_id("A", UnitPath(article=1, clause=-1))

    def test_injective_brute_force(self):
        # all document/article/clause paths with ordinals <= 50
        seen = {}
        paths = [UnitPath()]
        paths += [UnitPath(article=a) for a in range(1, 51)]
        paths += [
            UnitPath(article=a, clause=c) for a in range(1, 51) for c in range(1, 51)
        ]
        for p in paths:
            uid = make_unit_id("D", p)
            assert uid not in seen, f"collision: {p} vs {seen[uid]}"
            seen[uid] = p

    def test_deterministic(self):
        a = make_unit_id("X/2020/TT-BYT", UnitPath(article=3, clause=1))
        b = make_unit_id("X/2020/TT-BYT", UnitPath(article=3, clause=1))
        assert a == b


class TestParseDocument:
    def test_fixture_segmentation(self):
        units = parse_document("Điều 1. A\n1. x\n2. y\nĐiều 2. B", META)
        kinds = [u.kind for u in units]
        assert kinds == ["document", "article", "clause", "clause", "article"]
        clause_parents = [u.parent_id for u in units if u.kind == "clause"]
        assert clause_parents == ["15/2023/TT-BYT::Đ1", "15/2023/TT-BYT::Đ1"]

    def test_no_article_markers(self):
        units = parse_document("Một đoạn văn bản không có cấu trúc.", META)
        assert len(units) == 1
        assert units[0].kind == "document"
        assert units[0].text == "Một đoạn văn bản không có cấu trúc."

    def test_hand_counted_fixture(self):
        # 3 articles; article 1 has 2 clauses, article 3 has 3 clauses
        raw = (
            "THÔNG TƯ\nQuy định thử nghiệm\n"
            "Điều 1. Phạm vi\n1. Khoản một.\n2. Khoản hai.\n"
            "Điều 2. Đối tượng áp dụng\n"
            "Điều 3. Trách nhiệm\n1. a\n2. b\n3. c\n"
        )
        units = parse_document(raw, META)
        assert sum(u.kind == "document" for u in units) == 1
        assert sum(u.kind == "article" for u in units) == 3
        assert sum(u.kind == "clause" for u in units) == 5

    def test_empty_raises(self):
        with pytest.raises(MalformedDocument):
            parse_document("   \n  ", META)

    def test_leaf_concatenation_reconstructs_input(self):
        raw = "Mở đầu.\nĐiều 1. A\ncâu dẫn\n1. x\n2. y\nĐiều 2. B\nnội dung"
        normalized = normalize_text(raw)
        units = parse_document(raw, META)
        rebuilt = "\n".join(u.text for u in units if u.text)
        assert rebuilt == normalized

    def test_subpoint_letters_stay_inline(self):
        units = parse_document("Điều 1. T\n1. đầu\na) điểm a\nb) điểm b", META)
        clause = [u for u in units if u.kind == "clause"][0]
        assert "a) điểm a" in clause.text and "b) điểm b" in clause.text

    def test_parent_links_form_tree(self):
        units = parse_document("Điều 1. A\n1. x\nĐiều 2. B\n1. z", META)
        by_id = {u.id: u for u in units}
        for u in units:
            if u.kind == "document":
                assert u.parent_id is None
            else:
                assert u.parent_id in by_id


class TestExtractRelationMentions:
    def _unit(self, text):
        return parse_document(text, META)[0]

    def test_amends_with_explicit_doc(self):
        unit = self._unit("sửa đổi Điều 5 Thông tư 20/2021/TT-BYT")
        mentions = extract_relation_mentions(unit)
        assert len(mentions) == 1
        m = mentions[0]
        assert m.relation == "amends"
        assert m.target_doc == "20/2021/TT-BYT"
        assert m.target_unit == UnitPath(article=5)

    def test_refers_to_own_document(self):
        unit = self._unit("căn cứ Điều 3 của Luật này")
        mentions = extract_relation_mentions(unit)
        assert len(mentions) == 1
        m = mentions[0]
        assert m.relation == "refers_to"
        assert m.target_doc == META.doc_id
        assert m.target_unit == UnitPath(article=3)

    def test_no_triggers(self):
        unit = self._unit("Không có cụm từ kích hoạt nào ở đây.")
        assert extract_relation_mentions(unit) == []

    def test_supplements_clause(self):
        unit = self._unit("bổ sung Khoản 2 Điều 7 Nghị định 12/2022/NĐ-CP")
        [m] = extract_relation_mentions(unit)
        assert m.relation == "supplements"
        assert m.target_unit == UnitPath(article=7, clause=2)
        assert m.target_doc == "12/2022/NĐ-CP"

    def test_replaces(self):
        unit = self._unit("thay thế Điều 9 Thông tư 01/2019/TT-BYT")
        [m] = extract_relation_mentions(unit)
        assert m.relation == "replaces"

    def test_spans_within_text_and_ordered(self):
        text = "sửa đổi Điều 1 và bổ sung Điều 2 Thông tư 02/2020/TT-BYT"
        unit = self._unit(text)
        mentions = extract_relation_mentions(unit)
        assert [m.relation for m in mentions] == ["amends", "supplements"]
        last_end = -1
        for m in mentions:
            start, end = m.span
            assert 0 <= start < end <= len(unit.text)
            assert start >= last_end  # non-overlapping, document order
            last_end = end

    def test_only_legal_relations_emitted(self):
        text = "sửa đổi Điều 1; thay thế Điều 2; bổ sung Điều 3; căn cứ Điều 4"
        unit = self._unit(text)
        for m in extract_relation_mentions(unit):
            assert m.relation in ("amends", "replaces", "supplements", "refers_to")

    def test_rules_file_roundtrip(self, tmp_path):
        rules_file = tmp_path / "rules.txt"
        rules_file.write_text("amends\tsửa\\s+đổi\n# comment\nreplaces\tthay\\s+thế\n",
                              encoding="utf-8")
        rules = load_rules(rules_file)
        assert rules == [("amends", "sửa\\s+đổi"), ("replaces", "thay\\s+thế")]
        unit = self._unit("thay thế Điều 2")
        [m] = extract_relation_mentions(unit, rules)
        assert m.relation == "replaces"
