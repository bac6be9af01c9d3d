"""Deterministic word tokenization shared by post-processing and metrics."""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def word_tokens(text: str) -> list[str]:
    """Lowercased word tokens, split on whitespace and punctuation.

    Apostrophes split contractions ("I'll" -> ["i", "ll"]), which is what
    the pronoun and prompt-overlap filters rely on.
    """
    return _WORD_RE.findall(text.lower())
