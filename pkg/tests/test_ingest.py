"""Entity-record parsing, merging, and article-based enrichment."""

import json

import pytest

from armada.backends import MockLlmClient
from armada.errors import (
    ConflictingCanonicalName,
    EmptyField,
    MalformedRecord,
    UnparseableResponse,
)
from armada.ingest import extract_attributes_from_article, merge_records, parse_entity_records
from armada.prompts import render_prompt
from conftest import record

VALID_LINE = json.dumps(
    {
        "id": "linckia-laevigata",
        "canonical_name": "linckia laevigata",
        "aliases": ["linckia"],
        "parent_id": "valvatida",
        "attributes": {"color": ["blue", "dark blue"]},
    }
)


def test_parse_valid_line():
    records = parse_entity_records(VALID_LINE.encode(), source_name="kb.jsonl")
    assert len(records) == 1
    rec = records[0]
    assert rec.id == "linckia-laevigata"
    assert rec.attributes == {"color": ["blue", "dark blue"]}
    assert rec.source == "kb.jsonl:1"


def test_parse_empty_input():
    assert parse_entity_records(b"") == []


def test_parse_skips_blank_lines():
    data = ("\n" + VALID_LINE + "\n\n").encode()
    assert len(parse_entity_records(data)) == 1


def test_parse_missing_canonical_name():
    line = json.dumps({"id": "x"}).encode()
    with pytest.raises(EmptyField) as excinfo:
        parse_entity_records(line)
    assert excinfo.value.field == "canonical_name"
    assert excinfo.value.line == 1


def test_parse_rejects_unknown_keys():
    line = json.dumps({"id": "x", "canonical_name": "x", "extra": 1}).encode()
    with pytest.raises(MalformedRecord):
        parse_entity_records(line)


def test_parse_rejects_bad_json_with_line_number():
    data = (VALID_LINE + "\n{oops\n").encode()
    with pytest.raises(MalformedRecord) as excinfo:
        parse_entity_records(data)
    assert excinfo.value.line == 2


def test_parse_rejects_empty_value_list():
    line = json.dumps({"id": "x", "canonical_name": "x", "attributes": {"color": []}}).encode()
    with pytest.raises(EmptyField) as excinfo:
        parse_entity_records(line)
    assert excinfo.value.field == "attributes.color"


def test_parse_rejects_non_string_values():
    line = json.dumps(
        {"id": "x", "canonical_name": "x", "attributes": {"color": ["blue", 3]}}
    ).encode()
    with pytest.raises(MalformedRecord):
        parse_entity_records(line)


def test_parse_round_trip_is_fixed_point():
    from armada.kb import build_kb, serialize_kb

    parent = json.dumps({"id": "valvatida", "canonical_name": "valvatida"})
    data = (parent + "\n" + VALID_LINE + "\n").encode()
    once = serialize_kb(build_kb(parse_entity_records(data)))
    twice = serialize_kb(build_kb(parse_entity_records(once)))
    assert once == twice


def test_merge_unions_values():
    base = [record("e", name="entity", color=["blue"])]
    overlay = [record("e", name="entity", color=["dark blue"])]
    merged = merge_records(base, overlay)
    assert len(merged) == 1
    assert merged[0].attributes == {"color": ["blue", "dark blue"]}


def test_merge_empty_overlay_is_identity():
    base = [record("e", name="entity", color=["blue"])]
    assert merge_records(base, []) == base


def test_merge_is_idempotent():
    base = [record("e", name="entity", aliases=("x",), color=["blue"])]
    assert merge_records(base, base) == base


def test_merge_is_associative_on_fixture_triple():
    a = [record("e", name="entity", color=["blue"])]
    b = [record("e", name="entity", color=["dark blue"])]
    c = [record("e", name="entity", size=["small"])]
    left = merge_records(merge_records(a, b), c)
    right = merge_records(a, merge_records(b, c))
    assert left == right


def test_merge_overlay_parent_wins():
    merged = merge_records(
        [record("e", name="entity", parent="old"), record("old"), record("new")],
        [record("e", name="entity", parent="new")],
    )
    by_id = {r.id: r for r in merged}
    assert by_id["e"].parent_id == "new"


def test_merge_conflicting_names_rejected():
    with pytest.raises(ConflictingCanonicalName):
        merge_records(
            [record("e", name="linckia laevigata")],
            [record("e", name="henricia leviuscula")],
        )


ARTICLE = (
    "Linckia laevigata is a sea star of the coral reefs. Its color is blue or "
    "dark blue, and the number of arms starts from four, occasionally reaching five."
)


def _article_llm(response: str) -> MockLlmClient:
    prompt = render_prompt(
        "article_attributes_v1.txt", ENTITY="linckia laevigata", ARTICLE=ARTICLE
    )
    return MockLlmClient({prompt: response})


def test_extract_attributes_from_article():
    llm = _article_llm(
        json.dumps({"Color": ["blue", "dark blue"], "number of arms": ["four", "five"]})
    )
    attrs = extract_attributes_from_article(ARTICLE, "linckia laevigata", llm)
    # names come back normalized
    assert attrs == {"color": ["blue", "dark blue"], "number of arms": ["four", "five"]}


def test_extract_attributes_empty_object_allowed():
    llm = _article_llm("{}")
    assert extract_attributes_from_article(ARTICLE, "linckia laevigata", llm) == {}


def test_extract_attributes_rejects_prose():
    llm = _article_llm("The article describes a blue starfish.")
    with pytest.raises(UnparseableResponse):
        extract_attributes_from_article(ARTICLE, "linckia laevigata", llm)


def test_extract_attributes_rejects_non_array_values():
    llm = _article_llm(json.dumps({"color": "blue"}))
    with pytest.raises(UnparseableResponse):
        extract_attributes_from_article(ARTICLE, "linckia laevigata", llm)
