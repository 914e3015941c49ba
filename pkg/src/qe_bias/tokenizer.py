"""Shared tokenizer for diffing, BLEU, and word matching.

Unicode-aware: splits on whitespace and separates punctuation characters
(Unicode category P*) into standalone tokens. No lowercasing by default;
case can itself carry gender information in some scripts, so folding is
opt-in where a caller needs it.
"""

import unicodedata


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, fold_case: bool = False) -> list[str]:
    """Deterministic token split: whitespace-separated, punctuation isolated."""
    tokens: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf = []
        elif _is_punct(ch):
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
        else:
            buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    if fold_case:
        tokens = [t.casefold() for t in tokens]
    return tokens
