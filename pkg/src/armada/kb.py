"""Hierarchical entity-attribute knowledge base.

Nodes form a forest via parent links. Queries cover alias-based entity
linking, sibling lookup by shared attribute names, and seeded sampling of
alternative attribute values. A built KnowledgeBase is immutable by
convention; all queries are read-only.
"""

import json
import random
from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    DanglingParent,
    DuplicateId,
    NoAlternativeValue,
    UnknownAttribute,
    UnknownEntity,
)
from .text import normalize


@dataclass
class EntityNode:
    id: str
    canonical_name: str
    aliases: frozenset[str]
    parent_id: str | None
    # attribute name -> ordered, deduplicated, non-empty value list
    attributes: dict[str, list[str]]


@dataclass
class KnowledgeBase:
    nodes: dict[str, EntityNode] = field(default_factory=dict)
    # parent id -> sorted child ids; only parents with >=1 child appear
    children_index: dict[str, list[str]] = field(default_factory=dict)
    # normalized alias -> sorted ids carrying it
    alias_index: dict[str, list[str]] = field(default_factory=dict)

    def node(self, entity_id: str) -> EntityNode:
        try:
            return self.nodes[entity_id]
        except KeyError:
            raise UnknownEntity(entity_id) from None

    def children(self, entity_id: str) -> list[str]:
        return self.children_index.get(entity_id, [])

    def depth(self, entity_id: str) -> int:
        """Number of parent links between the node and its root."""
        steps = 0
        current = self.node(entity_id)
        while current.parent_id is not None:
            current = self.nodes[current.parent_id]
            steps += 1
        return steps

    def attribute_values(self, entity_id: str, attr: str) -> list[str]:
        """Value list for ``attr`` on the node, matched case-insensitively."""
        node = self.node(entity_id)
        wanted = normalize(attr)
        for name, values in node.attributes.items():
            if normalize(name) == wanted:
                return values
        raise UnknownAttribute(f"{entity_id!r} has no attribute {attr!r}")

    def has_attribute(self, entity_id: str, attr: str) -> bool:
        node = self.node(entity_id)
        wanted = normalize(attr)
        return any(normalize(name) == wanted for name in node.attributes)


def build_kb(records) -> KnowledgeBase:
    """Build a KnowledgeBase from parsed entity records.

    Accepts any objects with id, canonical_name, aliases, parent_id, and
    attributes fields. The same set of records yields an identical KB
    regardless of input order.
    """
    by_id: dict[str, EntityNode] = {}
    for record in records:
        if record.id in by_id:
            raise DuplicateId(record.id)
        attributes: dict[str, list[str]] = {}
        for name in sorted(record.attributes):
            values: list[str] = []
            seen: set[str] = set()
            for value in record.attributes[name]:
                key = normalize(value)
                if key not in seen:
                    seen.add(key)
                    values.append(value)
            attributes[name] = values
        by_id[record.id] = EntityNode(
            id=record.id,
            canonical_name=record.canonical_name,
            aliases=frozenset(record.aliases),
            parent_id=record.parent_id,
            attributes=attributes,
        )

    kb = KnowledgeBase(nodes={i: by_id[i] for i in sorted(by_id)})

    for node in kb.nodes.values():
        if node.parent_id is None:
            continue
        if node.parent_id not in kb.nodes:
            raise DanglingParent(f"{node.id!r} names missing parent {node.parent_id!r}")

    for start in kb.nodes.values():
        visited = {start.id}
        current = start
        while current.parent_id is not None:
            if current.parent_id in visited:
                raise CycleDetected(f"parent chain through {start.id!r} revisits a node")
            visited.add(current.parent_id)
            current = kb.nodes[current.parent_id]

    children: dict[str, list[str]] = {}
    for node in kb.nodes.values():
        if node.parent_id is not None:
            children.setdefault(node.parent_id, []).append(node.id)
    kb.children_index = {p: sorted(ids) for p, ids in sorted(children.items())}

    aliases: dict[str, set[str]] = {}
    for node in kb.nodes.values():
        for alias in set(node.aliases) | {node.canonical_name}:
            key = normalize(alias)
            if key:
                aliases.setdefault(key, set()).add(node.id)
    kb.alias_index = {a: sorted(ids) for a, ids in sorted(aliases.items())}
    return kb


def link_entity(kb: KnowledgeBase, mention: str) -> str | None:
    """Resolve a textual mention to an entity id via the alias index.

    Ambiguous aliases resolve to the deepest node (most specific concept),
    then the lexicographically smallest id. Returns None when nothing
    matches; callers fall back to the LLM substitution path.
    """
    candidates = kb.alias_index.get(normalize(mention))
    if not candidates:
        return None
    return min(candidates, key=lambda i: (-kb.depth(i), i))


def shared_attribute_count(kb: KnowledgeBase, a: str, b: str) -> int:
    """Number of attribute names (normalized) carried by both nodes."""
    names_a = {normalize(n) for n in kb.node(a).attributes}
    names_b = {normalize(n) for n in kb.node(b).attributes}
    return len(names_a & names_b)


def sibling_with_most_shared_attributes(kb: KnowledgeBase, entity_id: str) -> str | None:
    """Sibling (same parent) sharing the most attribute names with the node.

    Ties break to the lexicographically smallest id. Returns None for roots
    and only children.
    """
    node = kb.node(entity_id)
    if node.parent_id is None:
        return None
    siblings = [c for c in kb.children(node.parent_id) if c != entity_id]
    if not siblings:
        return None
    return min(siblings, key=lambda s: (-shared_attribute_count(kb, entity_id, s), s))


def sample_alternative_value(
    kb: KnowledgeBase, entity_id: str, attr: str, current: str, seed: int
) -> str:
    """Pick a value for ``attr`` on the node, uniformly among values that
    differ from ``current`` (case-insensitive). Deterministic given seed."""
    values = kb.attribute_values(entity_id, attr)
    current_key = normalize(current)
    alternatives = [v for v in values if normalize(v) != current_key]
    if not alternatives:
        raise NoAlternativeValue(
            f"{entity_id!r} attribute {attr!r} has no value other than {current!r}"
        )
    return random.Random(seed).choice(alternatives)


def serialize_kb(kb: KnowledgeBase) -> bytes:
    """Render the KB in the entity-record JSON-lines format, canonically:
    nodes sorted by id, aliases sorted, attribute names sorted."""
    lines = []
    for entity_id in sorted(kb.nodes):
        node = kb.nodes[entity_id]
        payload = {
            "id": node.id,
            "canonical_name": node.canonical_name,
            "aliases": sorted(node.aliases),
            "parent_id": node.parent_id,
            "attributes": {name: node.attributes[name] for name in sorted(node.attributes)},
        }
        lines.append(json.dumps(payload, ensure_ascii=False, sort_keys=False))
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def deserialize_kb(data: bytes) -> KnowledgeBase:
    """Inverse of serialize_kb: parse entity records and rebuild."""
    from .ingest import parse_entity_records

    return build_kb(parse_entity_records(data))
