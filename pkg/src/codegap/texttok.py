"""Whitespace-free token view of serialized pair text.

Persisted pairs store context/target as plain strings; everything downstream
(the hashed encoder, token budgeting, the lexical baseline) re-tokenizes them
with one shared regex: marker tokens like <mask> stay atomic, words and
individual punctuation characters are the rest.
"""

from __future__ import annotations

import re

TEXT_TOKEN_RE = re.compile(r"<[a-z][a-z0-9_]*>|\w+|[^\w\s]")


def text_tokens(text: str) -> list[str]:
    return TEXT_TOKEN_RE.findall(text)


def count_text_tokens(text: str) -> int:
    return len(text_tokens(text))


def truncate_text_tokens(text: str, max_tokens: int) -> str:
    """Cut the string after max_tokens tokens, keeping original spacing."""
    if max_tokens <= 0:
        return ""
    for i, match in enumerate(TEXT_TOKEN_RE.finditer(text)):
        if i == max_tokens:
            return text[:match.start()].rstrip()
    return text
