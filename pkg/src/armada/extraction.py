"""Extraction of (entity, attribute, value) triples from caption text.

Two extractors: the LLM-backed one sends the caption in a fixed prompt and
locates each reported mention back in the text, and a lexicon one that runs
entirely off the knowledge base for offline use. Both return triples with
character spans that slice back to their mentions.
"""

import json
import logging
from dataclasses import dataclass

from .errors import UnparseableResponse
from .kb import KnowledgeBase, link_entity
from .prompts import render_prompt
from .text import find_word

logger = logging.getLogger(__name__)

_TRIPLE_KEYS = {"entity", "attribute", "value"}


@dataclass
class ExtractedTriple:
    entity_mention: str
    entity_span: tuple[int, int]
    attribute_name: str
    value_mention: str
    value_span: tuple[int, int]


@dataclass
class TripleExtraction:
    triples: list[ExtractedTriple]
    # mentions reported by the model but not locatable in the text
    dropped: int


def parse_extraction_response(raw: str) -> list[tuple[str, str, str]]:
    """Strictly parse the LLM response: a JSON array of objects with keys
    exactly entity/attribute/value, all non-empty strings."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UnparseableResponse(f"extraction response is not JSON: {exc.msg}") from exc
    if not isinstance(data, list):
        raise UnparseableResponse("extraction response is not a JSON array")
    out = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != _TRIPLE_KEYS:
            raise UnparseableResponse(
                f"element {i} must be an object with keys entity, attribute, value"
            )
        entity, attribute, value = item["entity"], item["attribute"], item["value"]
        for key, text in (("entity", entity), ("attribute", attribute), ("value", value)):
            if not isinstance(text, str) or not text.strip():
                raise UnparseableResponse(f"element {i}: {key} must be a non-empty string")
        out.append((entity, attribute, value))
    return out


def _find_ci(text: str, needle: str, start: int = 0) -> tuple[int, int] | None:
    idx = text.lower().find(needle.lower(), start)
    if idx < 0:
        return None
    return idx, idx + len(needle)


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def extract_triples(text: str, llm) -> TripleExtraction:
    """Extract triples from ``text`` via the LLM backend.

    Each reported mention is located by first case-insensitive occurrence;
    the value span additionally skips occurrences overlapping the entity
    span. Triples whose mentions cannot be located are dropped and counted.
    """
    prompt = render_prompt("triple_extraction_v1.txt", T=text)
    raw = llm.complete(prompt)
    triples = []
    dropped = 0
    for entity, attribute, value in parse_extraction_response(raw):
        entity_span = _find_ci(text, entity)
        if entity_span is None:
            dropped += 1
            logger.warning("entity mention %r not found in text, dropping triple", entity)
            continue
        value_span = _find_ci(text, value)
        while value_span is not None and _overlaps(value_span, entity_span):
            value_span = _find_ci(text, value, value_span[0] + 1)
        if value_span is None:
            dropped += 1
            logger.warning("value mention %r not found in text, dropping triple", value)
            continue
        triples.append(
            ExtractedTriple(
                entity_mention=entity,
                entity_span=entity_span,
                attribute_name=attribute,
                value_mention=value,
                value_span=value_span,
            )
        )
    return TripleExtraction(triples=triples, dropped=dropped)


def lexicon_extract(text: str, kb: KnowledgeBase) -> list[ExtractedTriple]:
    """Extract triples using only the knowledge base.

    The entity is the longest KB alias occurring in the text at word
    boundaries (ties: earliest occurrence, then lexicographically smallest
    alias). For each attribute of the linked node, the first value string
    found in the text (outside the entity span) yields one triple.
    """
    best: tuple[int, int, str, tuple[int, int]] | None = None
    for alias in kb.alias_index:
        span = find_word(text, alias)
        if span is None:
            continue
        key = (-len(alias), span[0], alias)
        if best is None or key < best[:3]:
            best = (*key, span)
    if best is None:
        return []
    _, _, alias, entity_span = best
    entity_id = link_entity(kb, alias)
    if entity_id is None:
        return []
    node = kb.nodes[entity_id]
    entity_mention = text[entity_span[0]:entity_span[1]]

    triples = []
    for attr_name in node.attributes:
        for value in node.attributes[attr_name]:
            span = find_word(text, value)
            if span is not None and not _overlaps(span, entity_span):
                triples.append(
                    ExtractedTriple(
                        entity_mention=entity_mention,
                        entity_span=entity_span,
                        attribute_name=attr_name,
                        value_mention=text[span[0]:span[1]],
                        value_span=span,
                    )
                )
                break
    return triples
