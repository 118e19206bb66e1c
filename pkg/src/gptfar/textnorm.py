"""Deterministic text normalization shared by tag cleaning and category matching."""

from __future__ import annotations

import re

# Words that look plural but are not, or whose singular form is irregular
# enough that stripping the trailing "s" would corrupt them.
SINGULAR_EXCEPTIONS = frozenset({"bias", "canvas", "plus"})

_EDGE_PUNCT = re.compile(r"^[\W_]+|[\W_]+$", re.UNICODE)

_MAX_PASSES = 10


class EmptyAfterNormalization(ValueError):
    """Raised when normalization strips a tag down to nothing."""


def singularize_word(word: str) -> str:
    """Reduce an English plural suffix with a small deterministic rule table.

    Words of three characters or fewer and known exceptions are left alone.
    Words ending in "ss" are protected so the reduction is idempotent.
    """
    if len(word) <= 3 or word in SINGULAR_EXCEPTIONS:
        return word
    if word.endswith("ies") and len(word) >= 5:
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("es") and word[:-2].endswith(("x", "z", "ch", "sh")):
        return word[:-2]
    if word.endswith("s"):
        return word[:-1]
    return word


def _normalize_pass(text: str) -> str:
    text = text.lower()
    text = " ".join(text.split())
    text = _EDGE_PUNCT.sub("", text)
    return " ".join(singularize_word(w) for w in text.split())


def unify_format(tag: str) -> str:
    """Normalize a raw tag: case fold, collapse whitespace, strip surrounding
    punctuation, and reduce plural suffixes per word.

    Applies the pass repeatedly until a fixed point so the result is
    idempotent (singularizing can expose trailing punctuation, e.g. "looks-s").

    Raises EmptyAfterNormalization when nothing survives.
    """
    result = _normalize_pass(tag)
    for _ in range(_MAX_PASSES):
        again = _normalize_pass(result)
        if again == result:
            break
        result = again
    if not result:
        raise EmptyAfterNormalization(f"tag {tag!r} is empty after normalization")
    return result
