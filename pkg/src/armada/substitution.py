"""Substitution planning: turn an extracted triple into a rewritten caption
plus an image-edit instruction.

Three strategies: swap the attribute value within the same entity, swap both
entity and value using the most-similar sibling in the knowledge base, or ask
the LLM for alternative values when the knowledge base cannot help.
"""

import json
import random
from dataclasses import dataclass
from enum import Enum

from .errors import LinkFailed, NoAlternativeValue, NoSibling, UnparseableResponse
from .extraction import ExtractedTriple
from .kb import (
    KnowledgeBase,
    link_entity,
    sample_alternative_value,
    sibling_with_most_shared_attributes,
)
from .prompts import render_prompt
from .text import normalize, replace_spans


class Strategy(str, Enum):
    WITHIN_ENTITY = "WithinEntity"
    SIBLING_ENTITY = "SiblingEntity"
    LLM_ATTRIBUTE = "LlmAttribute"


@dataclass
class SubstitutionPlan:
    kind: Strategy
    source_triple: ExtractedTriple
    entity_id: str | None
    new_entity_id: str | None
    new_entity_name: str | None
    attribute_name: str
    old_value: str
    new_value: str
    rewritten_text: str
    edit_instruction: str


def rewrite_text(text: str, replacements: list[tuple[tuple[int, int], str]]) -> str:
    """Replace spans of the original text, preserving leading-letter case.

    Spans reference the original text only and must not overlap.
    """
    spans = []
    for (start, end), replacement in replacements:
        spans.append((start, end, _match_case(text[start:end], replacement)))
    return replace_spans(text, spans)


def _match_case(original: str, replacement: str) -> str:
    """Carry the original's leading-character case onto the replacement."""
    if not original or not replacement:
        return replacement
    if original[0].isupper():
        return replacement[0].upper() + replacement[1:]
    if original[0].islower():
        return replacement[0].lower() + replacement[1:]
    return replacement


def make_edit_instruction(plan: SubstitutionPlan) -> str:
    """Render the editor instruction for a plan.

    The entity slot always names the ORIGINAL mention, because the backend
    edits the original image. Sibling swaps extend the template with the
    target entity, which the bare template cannot express.
    """
    entity = plan.source_triple.entity_mention
    base = f"Change the {plan.attribute_name} of the {entity} to {plan.new_value}"
    if plan.kind is Strategy.SIBLING_ENTITY:
        return f"{base} so that it looks like a {plan.new_entity_name}"
    return base


def plan_within_entity(
    kb: KnowledgeBase, text: str, triple: ExtractedTriple, seed: int
) -> SubstitutionPlan:
    """Keep the entity, swap its attribute value for another KB value."""
    entity_id = link_entity(kb, triple.entity_mention)
    if entity_id is None:
        raise LinkFailed(triple.entity_mention)
    new_value = sample_alternative_value(
        kb, entity_id, triple.attribute_name, triple.value_mention, seed
    )
    plan = SubstitutionPlan(
        kind=Strategy.WITHIN_ENTITY,
        source_triple=triple,
        entity_id=entity_id,
        new_entity_id=None,
        new_entity_name=None,
        attribute_name=triple.attribute_name,
        old_value=triple.value_mention,
        new_value=new_value,
        rewritten_text=rewrite_text(text, [(triple.value_span, new_value)]),
        edit_instruction="",
    )
    plan.edit_instruction = make_edit_instruction(plan)
    return plan


def plan_sibling(
    kb: KnowledgeBase, text: str, triple: ExtractedTriple, seed: int
) -> SubstitutionPlan:
    """Swap in the sibling entity sharing the most attributes, with a value
    drawn from the sibling's own domain for the triple's attribute."""
    entity_id = link_entity(kb, triple.entity_mention)
    if entity_id is None:
        raise LinkFailed(triple.entity_mention)
    sibling_id = sibling_with_most_shared_attributes(kb, entity_id)
    if sibling_id is None:
        raise NoSibling(entity_id)
    new_value = sample_alternative_value(
        kb, sibling_id, triple.attribute_name, triple.value_mention, seed
    )
    sibling_name = kb.nodes[sibling_id].canonical_name
    plan = SubstitutionPlan(
        kind=Strategy.SIBLING_ENTITY,
        source_triple=triple,
        entity_id=entity_id,
        new_entity_id=sibling_id,
        new_entity_name=sibling_name,
        attribute_name=triple.attribute_name,
        old_value=triple.value_mention,
        new_value=new_value,
        rewritten_text=rewrite_text(
            text,
            [(triple.value_span, new_value), (triple.entity_span, sibling_name)],
        ),
        edit_instruction="",
    )
    plan.edit_instruction = make_edit_instruction(plan)
    return plan


def plan_llm_attribute(
    text: str, triple: ExtractedTriple, llm, seed: int
) -> SubstitutionPlan:
    """Ask the LLM for alternative values of an attribute the KB lacks."""
    prompt = render_prompt(
        "attribute_alternatives_v1.txt",
        ATTRIBUTE=triple.attribute_name,
        SENTENCE=text,
    )
    raw = llm.complete(prompt)
    candidates = _parse_value_list(raw)
    current = normalize(triple.value_mention)
    alternatives = [v for v in candidates if normalize(v) != current]
    if not alternatives:
        raise NoAlternativeValue(
            f"no alternative for {triple.attribute_name!r} beyond {triple.value_mention!r}"
        )
    new_value = random.Random(seed).choice(alternatives)
    plan = SubstitutionPlan(
        kind=Strategy.LLM_ATTRIBUTE,
        source_triple=triple,
        entity_id=None,
        new_entity_id=None,
        new_entity_name=None,
        attribute_name=triple.attribute_name,
        old_value=triple.value_mention,
        new_value=new_value,
        rewritten_text=rewrite_text(text, [(triple.value_span, new_value)]),
        edit_instruction="",
    )
    plan.edit_instruction = make_edit_instruction(plan)
    return plan


def _parse_value_list(raw: str) -> list[str]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UnparseableResponse(f"value response is not JSON: {exc.msg}") from exc
    if not isinstance(data, list) or any(
        not isinstance(v, str) or not v.strip() for v in data
    ):
        raise UnparseableResponse("value response must be a JSON array of non-empty strings")
    return data
