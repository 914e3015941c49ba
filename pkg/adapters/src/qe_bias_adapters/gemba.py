"""Direct-assessment prompting: template rendering and score extraction.

The prompt asks for a 0-100 quality score. Model output is free text, so
extraction runs a small list of recommendation-phrase patterns first and
falls back to the first number in the response. Replies without a usable
score, or with a score below 10 (numbered-list artifacts) or above 100,
are rejected; rejection is a value, not an error, and callers count it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

PLAIN = "plain"
CTX_V1 = "ctx_v1"
CTX_V2 = "ctx_v2"

VARIANTS = (PLAIN, CTX_V1, CTX_V2)

_HEAD = (
    "Score the following translation from {src_lang} to {tgt_lang} on a "
    "continuous scale from 0 to 100{ctx_clause}, where score of zero means "
    '"no meaning preserved" and score of one hundred means "perfect meaning '
    'and grammar".'
)

# Ordered: first match wins. Extend here for model-specific phrasings.
SCORE_PATTERNS = (
    re.compile(r"i would score this translation (?:as |at )?(\d+(?:\.\d+)?)", re.IGNORECASE),
    re.compile(
        r"i would (?:rate|give) this translation (?:a |an )?(?:score of )?(\d+(?:\.\d+)?)",
        re.IGNORECASE,
    ),
)

_FIRST_NUMBER = re.compile(r"\d+(?:\.\d+)?")

MIN_ACCEPTED_SCORE = 10.0
MAX_ACCEPTED_SCORE = 100.0


@dataclass(frozen=True)
class GembaTemplate:
    """Prompt template for direct-assessment scoring.

    Context variants prepend the disambiguating sentence: v1 repeats the
    source label, v2 adds an explicit instruction line and labels the
    context line as such.
    """

    variant: str = PLAIN
    src_lang: str = "English"
    tgt_lang: str = "Italian"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown template variant {self.variant!r}")

    def render(self, source: str, hypothesis: str, context: str | None = None) -> str:
        if self.variant != PLAIN and not context:
            raise ValueError(f"template variant {self.variant} requires a context sentence")
        head = _HEAD.format(
            src_lang=self.src_lang,
            tgt_lang=self.tgt_lang,
            ctx_clause=" given the preceding context" if self.variant == CTX_V1 else "",
        )
        lines = [head]
        if self.variant == CTX_V1:
            lines.append(f'{self.src_lang} source: "{context}"')
        elif self.variant == CTX_V2:
            lines.append("You can use the preceding context to evaluate the translation of the source.")
            lines.append(f'{self.src_lang} preceding context: "{context}"')
        lines.append(f'{self.src_lang} source: "{source}"')
        lines.append(f'{self.tgt_lang} translation: "{hypothesis}"')
        lines.append("Score: ")
        return "\n".join(lines)


def extract_gemba_score(response_text: str) -> float | None:
    """Pull the assessment score out of a model reply, or None if rejected.

    Total and idempotent: any text maps to a score in [10, 100] or to
    None. Scores below 10 are rejected because list-formatted replies
    ("1. ...") would otherwise read as tiny scores.
    """
    if not isinstance(response_text, str):
        return None
    value = None
    for pattern in SCORE_PATTERNS:
        match = pattern.search(response_text)
        if match:
            value = float(match.group(1))
            break
    if value is None:
        match = _FIRST_NUMBER.search(response_text)
        if match:
            value = float(match.group(0))
    if value is None or value < MIN_ACCEPTED_SCORE or value > MAX_ACCEPTED_SCORE:
        return None
    return value
