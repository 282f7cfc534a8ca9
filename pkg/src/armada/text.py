"""Text normalization and mention-search helpers.

Alias lookup, attribute-name comparison, and value de-duplication all funnel
through :func:`normalize` so the whole package agrees on what "the same
string" means.
"""

import re
import string

_WHITESPACE = re.compile(r"\s+")

# Word characters for boundary checks: letters, digits, underscore.
_WORD = re.compile(r"\w")


def normalize(text: str) -> str:
    """Return ``text`` lowercased, whitespace-collapsed, and stripped.

    Internal whitespace runs collapse to a single space; leading and trailing
    punctuation and whitespace are removed. Idempotent.
    """
    collapsed = _WHITESPACE.sub(" ", text.lower())
    return collapsed.strip(string.punctuation + string.whitespace)


def find_word(haystack: str, needle: str) -> tuple[int, int] | None:
    """Locate ``needle`` in ``haystack`` case-insensitively at word boundaries.

    Returns the (start, end) span of the first match, or None. A match is
    rejected when a word character directly abuts it on either side, so
    "cat" does not match inside "category".
    """
    if not needle:
        return None
    hay = haystack.lower()
    ndl = needle.lower()
    start = 0
    while True:
        idx = hay.find(ndl, start)
        if idx < 0:
            return None
        end = idx + len(ndl)
        before_ok = idx == 0 or not _WORD.match(hay[idx - 1])
        after_ok = end == len(hay) or not _WORD.match(hay[end])
        if before_ok and after_ok:
            return idx, end
        start = idx + 1


def replace_spans(text: str, spans: list[tuple[int, int, str]]) -> str:
    """Apply span replacements to ``text`` in one pass.

    Each span is (start, end, replacement) with 0 <= start <= end <= len(text).
    Spans must not overlap; they may touch. A double space arising at a seam
    collapses to one. Raises :class:`armada.errors.SpanOutOfRange` or
    :class:`armada.errors.OverlappingSpans` otherwise.
    """
    from .errors import OverlappingSpans, SpanOutOfRange

    ordered = sorted(spans, key=lambda s: (s[0], s[1]))
    prev_end = 0
    for start, end, _ in ordered:
        if start < 0 or end > len(text) or start > end:
            raise SpanOutOfRange(f"span ({start}, {end}) outside text of length {len(text)}")
        if start < prev_end:
            raise OverlappingSpans(f"span ({start}, {end}) overlaps a prior span")
        prev_end = end
    pieces = []
    cursor = 0
    for start, end, replacement in ordered:
        pieces.append(text[cursor:start])
        pieces.append(replacement)
        cursor = end
    pieces.append(text[cursor:])

    result: list[str] = []
    last_char = ""
    for piece in pieces:
        if piece and last_char == " " and piece.startswith(" "):
            piece = piece[1:]
        if piece:
            result.append(piece)
            last_char = piece[-1]
    return "".join(result)
