"""Entity-record file parsing, LLM-backed enrichment, and record merging.

The entity-record wire format is UTF-8 JSON-lines, one object per line with
keys exactly id, canonical_name, aliases, parent_id, attributes. It is both
the knowledge-base serialization format and the input to `kb build`.
"""

import json
import logging
from dataclasses import dataclass, field

from .errors import ConflictingCanonicalName, EmptyField, MalformedRecord, UnparseableResponse
from .prompts import render_prompt
from .text import normalize

logger = logging.getLogger(__name__)

_RECORD_KEYS = {"id", "canonical_name", "aliases", "parent_id", "attributes"}


@dataclass
class EntityRecord:
    id: str
    canonical_name: str
    aliases: list[str] = field(default_factory=list)
    parent_id: str | None = None
    attributes: dict[str, list[str]] = field(default_factory=dict)
    # provenance only; never affects equality or downstream behavior
    source: str = field(default="", compare=False)


def _require_string(obj, key: str, line: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value.strip():
        raise EmptyField(line, key)
    return value


def parse_entity_records(data: bytes, source_name: str = "<stream>") -> list[EntityRecord]:
    """Parse newline-delimited entity records, preserving line provenance.

    Blank lines are skipped. Any structural problem raises MalformedRecord
    or EmptyField carrying the 1-based line number.
    """
    records = []
    text = data.decode("utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record is not a JSON object")
        unknown = set(obj) - _RECORD_KEYS
        if unknown:
            raise MalformedRecord(line_no, f"unknown keys: {sorted(unknown)}")

        record_id = _require_string(obj, "id", line_no)
        canonical_name = _require_string(obj, "canonical_name", line_no)

        aliases = obj.get("aliases", [])
        if not isinstance(aliases, list) or any(
            not isinstance(a, str) or not a.strip() for a in aliases
        ):
            raise MalformedRecord(line_no, "aliases must be a list of non-empty strings")

        parent_id = obj.get("parent_id")
        if parent_id is not None and (not isinstance(parent_id, str) or not parent_id.strip()):
            raise MalformedRecord(line_no, "parent_id must be null or a non-empty string")

        attributes = obj.get("attributes", {})
        if not isinstance(attributes, dict):
            raise MalformedRecord(line_no, "attributes must be an object")
        for name, values in attributes.items():
            if not isinstance(name, str) or not name.strip():
                raise MalformedRecord(line_no, "attribute names must be non-empty strings")
            if not isinstance(values, list) or not values:
                raise EmptyField(line_no, f"attributes.{name}")
            if any(not isinstance(v, str) or not v.strip() for v in values):
                raise MalformedRecord(
                    line_no, f"values of attribute {name!r} must be non-empty strings"
                )

        records.append(
            EntityRecord(
                id=record_id,
                canonical_name=canonical_name,
                aliases=list(aliases),
                parent_id=parent_id,
                attributes={k: list(v) for k, v in attributes.items()},
                source=f"{source_name}:{line_no}",
            )
        )
    return records


def extract_attributes_from_article(
    article_text: str, entity_name: str, llm
) -> dict[str, list[str]]:
    """Ask the LLM for the visual attributes an article describes.

    The response must be a single JSON object mapping attribute names to
    arrays of value strings; anything else raises UnparseableResponse.
    Attribute names come back normalized. An empty object is valid (the
    article describes nothing visual).
    """
    prompt = render_prompt(
        "article_attributes_v1.txt", ENTITY=entity_name, ARTICLE=article_text
    )
    raw = llm.complete(prompt)
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UnparseableResponse(f"attribute response is not JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise UnparseableResponse("attribute response is not a JSON object")
    result: dict[str, list[str]] = {}
    for name, values in obj.items():
        if not isinstance(name, str) or not normalize(name):
            raise UnparseableResponse(f"bad attribute name: {name!r}")
        if not isinstance(values, list) or not values:
            raise UnparseableResponse(f"attribute {name!r} must map to a non-empty array")
        if any(not isinstance(v, str) or not v.strip() for v in values):
            raise UnparseableResponse(f"attribute {name!r} has a non-string or empty value")
        result[normalize(name)] = [v.strip() for v in values]
    return result


def merge_records(base, overlay) -> list[EntityRecord]:
    """Merge two record sequences by id.

    Shared ids union their alias and value lists (base entries first);
    the overlay's parent wins when present. Output order is base order
    followed by overlay-only ids in overlay order.
    """
    merged: dict[str, EntityRecord] = {}
    order: list[str] = []
    for record in list(base) + list(overlay):
        if record.id not in merged:
            merged[record.id] = EntityRecord(
                id=record.id,
                canonical_name=record.canonical_name,
                aliases=list(record.aliases),
                parent_id=record.parent_id,
                attributes={k: list(v) for k, v in record.attributes.items()},
                source=record.source,
            )
            order.append(record.id)
            continue
        target = merged[record.id]
        if normalize(target.canonical_name) != normalize(record.canonical_name):
            raise ConflictingCanonicalName(
                record.id, target.canonical_name, record.canonical_name
            )
        known_aliases = {normalize(a) for a in target.aliases}
        for alias in record.aliases:
            if normalize(alias) not in known_aliases:
                known_aliases.add(normalize(alias))
                target.aliases.append(alias)
        if record.parent_id is not None:
            target.parent_id = record.parent_id
        for name, values in record.attributes.items():
            slot = None
            wanted = normalize(name)
            for existing in target.attributes:
                if normalize(existing) == wanted:
                    slot = existing
                    break
            if slot is None:
                target.attributes[name] = list(values)
                continue
            known = {normalize(v) for v in target.attributes[slot]}
            for value in values:
                if normalize(value) not in known:
                    known.add(normalize(value))
                    target.attributes[slot].append(value)
    return [merged[i] for i in order]
