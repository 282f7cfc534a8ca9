"""Triple extraction: LLM-backed with span location, and the KB lexicon path."""

import json

import pytest

from armada.backends import MockLlmClient
from armada.errors import UnparseableResponse
from armada.extraction import extract_triples, lexicon_extract, parse_extraction_response
from armada.kb import build_kb
from armada.prompts import render_prompt
from conftest import record

CAPTION = "A blue linckia laevigata rests on the coral reef"


def _llm_for(text: str, response: str) -> MockLlmClient:
    prompt = render_prompt("triple_extraction_v1.txt", T=text)
    return MockLlmClient({prompt: response})


REEF_RESPONSE = json.dumps(
    [
        {"entity": "linckia laevigata", "attribute": "color", "value": "blue"},
        {"entity": "linckia laevigata", "attribute": "location", "value": "coral reef"},
    ]
)


def test_parse_extraction_response_valid():
    parsed = parse_extraction_response(REEF_RESPONSE)
    assert parsed == [
        ("linckia laevigata", "color", "blue"),
        ("linckia laevigata", "location", "coral reef"),
    ]


def test_parse_extraction_response_empty_array():
    assert parse_extraction_response("[]") == []


def test_parse_extraction_response_rejects_prose():
    with pytest.raises(UnparseableResponse):
        parse_extraction_response("The entity is a starfish.")


def test_parse_extraction_response_rejects_extra_keys():
    raw = json.dumps([{"entity": "a", "attribute": "b", "value": "c", "note": "d"}])
    with pytest.raises(UnparseableResponse):
        parse_extraction_response(raw)


def test_parse_extraction_response_rejects_empty_strings():
    raw = json.dumps([{"entity": "a", "attribute": " ", "value": "c"}])
    with pytest.raises(UnparseableResponse):
        parse_extraction_response(raw)


def test_extract_triples_locates_spans():
    result = extract_triples(CAPTION, _llm_for(CAPTION, REEF_RESPONSE))
    assert result.dropped == 0
    assert [t.attribute_name for t in result.triples] == ["color", "location"]
    for triple in result.triples:
        s, e = triple.entity_span
        assert CAPTION[s:e].lower() == triple.entity_mention.lower()
        s, e = triple.value_span
        assert CAPTION[s:e].lower() == triple.value_mention.lower()


def test_extract_triples_drops_unlocatable_mentions():
    response = json.dumps(
        [
            {"entity": "linckia laevigata", "attribute": "color", "value": "purple"},
            {"entity": "linckia laevigata", "attribute": "color", "value": "blue"},
        ]
    )
    result = extract_triples(CAPTION, _llm_for(CAPTION, response))
    assert result.dropped == 1
    assert [t.value_mention for t in result.triples] == ["blue"]


def test_extract_triples_empty_response():
    result = extract_triples(CAPTION, _llm_for(CAPTION, "[]"))
    assert result.triples == [] and result.dropped == 0


def test_extract_triples_value_span_avoids_entity_overlap():
    # "blue" also opens the entity mention; the value span must not overlap it
    text = "the blue star is blue"
    response = json.dumps([{"entity": "blue star", "attribute": "color", "value": "blue"}])
    result = extract_triples(text, _llm_for(text, response))
    (triple,) = result.triples
    assert triple.entity_span == (4, 13)
    assert triple.value_span == (17, 21)
    es, vs = triple.entity_span, triple.value_span
    assert vs[0] >= es[1] or vs[1] <= es[0]


def test_extract_triples_propagates_unparseable():
    with pytest.raises(UnparseableResponse):
        extract_triples(CAPTION, _llm_for(CAPTION, "no json here"))


@pytest.fixture
def reef_kb():
    return build_kb(
        [
            record("valvatida"),
            record(
                "linckia-laevigata",
                name="linckia laevigata",
                parent="valvatida",
                aliases=("linckia",),
                color=["blue", "dark blue"],
                number_of_arms=["four", "five"],
            ),
        ]
    )


def test_lexicon_extract_reef_trace(reef_kb):
    triples = lexicon_extract(CAPTION, reef_kb)
    assert len(triples) == 1
    triple = triples[0]
    assert triple.entity_mention == "linckia laevigata"
    assert triple.attribute_name == "color"
    assert triple.value_mention == "blue"
    assert CAPTION[triple.value_span[0] : triple.value_span[1]] == "blue"


def test_lexicon_extract_prefers_longest_alias(reef_kb):
    # both "linckia" and "linckia laevigata" occur; the longer alias wins
    triples = lexicon_extract("A blue linckia laevigata", reef_kb)
    assert triples and triples[0].entity_mention == "linckia laevigata"


def test_lexicon_extract_no_alias_matches(reef_kb):
    assert lexicon_extract("A plain rock on the sand", reef_kb) == []


def test_lexicon_extract_is_deterministic(reef_kb):
    text = "A blue linckia laevigata with five arms"
    assert lexicon_extract(text, reef_kb) == lexicon_extract(text, reef_kb)


def test_lexicon_extract_multiple_attributes(reef_kb):
    text = "A blue linckia laevigata with five arms"
    triples = lexicon_extract(text, reef_kb)
    assert {(t.attribute_name, t.value_mention) for t in triples} == {
        ("color", "blue"),
        ("number of arms", "five"),
    }
