"""Versioned prompt templates shipped as package resources.

Placeholders are spelled $NAME$ and filled by literal replacement, so caption
text containing braces or dollar signs never breaks rendering. Template files
are versioned by filename; changing a prompt means shipping a new file, which
keeps fixture tables keyed by prompt hash stable.
"""

from functools import cache
from importlib import resources


@cache
def _load(name: str) -> str:
    path = resources.files("armada.resources.prompts").joinpath(name)
    return path.read_text(encoding="utf-8")


def render_prompt(name: str, **substitutions: str) -> str:
    text = _load(name)
    for key, value in substitutions.items():
        text = text.replace(f"${key}$", value)
    return text
