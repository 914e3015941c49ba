import time
from contextlib import contextmanager

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qe_bias_adapters.gemba import GembaTemplate, extract_gemba_score


@contextmanager
def criterion(name):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL {name}")
        raise
    print(f"ACCEPTANCE PASS {name} ({time.perf_counter() - start:.2f}s)")


class TestTemplateRendering:
    def test_plain_layout(self):
        prompt = GembaTemplate("plain", "English", "Italian").render(
            "The academic works.", "L'accademico lavora."
        )
        lines = prompt.splitlines()
        assert lines[0].startswith(
            "Score the following translation from English to Italian on a "
            "continuous scale from 0 to 100, where score of zero"
        )
        assert lines[1] == 'English source: "The academic works."'
        assert lines[2] == 'Italian translation: "L\'accademico lavora."'
        assert lines[3] == "Score: "

    def test_ctx_v1_repeats_source_label(self):
        prompt = GembaTemplate("ctx_v1", "English", "Italian").render(
            "The academic works.", "L'accademica lavora.", context="Her book came out."
        )
        lines = prompt.splitlines()
        assert "given the preceding context" in lines[0]
        assert lines[1] == 'English source: "Her book came out."'
        assert lines[2] == 'English source: "The academic works."'
        assert lines[3] == 'Italian translation: "L\'accademica lavora."'
        assert lines[4] == "Score: "

    def test_ctx_v2_labels_context_line(self):
        prompt = GembaTemplate("ctx_v2", "English", "German").render(
            "The academic works.", "Die Akademikerin arbeitet.", context="Her book came out."
        )
        lines = prompt.splitlines()
        assert "given the preceding context" not in lines[0]
        assert lines[1] == (
            "You can use the preceding context to evaluate the translation of the source."
        )
        assert lines[2] == 'English preceding context: "Her book came out."'
        assert lines[3] == 'English source: "The academic works."'
        assert lines[4] == 'German translation: "Die Akademikerin arbeitet."'

    def test_ctx_variants_require_context(self):
        for variant in ("ctx_v1", "ctx_v2"):
            with pytest.raises(ValueError, match="context"):
                GembaTemplate(variant).render("src", "hyp")

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            GembaTemplate("few_shot")


class TestScoreExtraction:
    def test_recommendation_pattern(self):
        assert extract_gemba_score("I would score this translation 85.") == 85.0

    def test_first_number_fallback(self):
        assert extract_gemba_score("Score: 90") == 90.0

    def test_numbered_list_rejected(self):
        assert extract_gemba_score("1. The translation is fluent.") is None

    def test_no_score_rejected(self):
        assert extract_gemba_score("The translation preserves the meaning well.") is None

    def test_decimal_scores(self):
        assert extract_gemba_score("I would score this translation 92.5") == 92.5

    def test_pattern_takes_precedence_over_earlier_numbers(self):
        text = "Of 3 issues, none is severe. I would score this translation 88."
        assert extract_gemba_score(text) == 88.0

    def test_second_pattern(self):
        assert extract_gemba_score("I would give this translation a score of 75") == 75.0

    def test_above_range_rejected(self):
        assert extract_gemba_score("easily a 150 out of 100") is None

    def test_low_boundary(self):
        assert extract_gemba_score("10") == 10.0
        assert extract_gemba_score("9.9") is None

    @given(st.text(max_size=200))
    @settings(max_examples=300)
    def test_total_and_idempotent(self, text):
        first = extract_gemba_score(text)
        assert extract_gemba_score(text) == first
        assert first is None or 10.0 <= first <= 100.0


TRANSCRIPT = [
    "85",
    "Score: 90",
    "I would score this translation 95.",
    "I would score this translation as 72.",
    "90. The grammar is flawless.",
    "The translation is accurate and fluent. 88",
    "92.5",
    "I would give this translation a score of 70",
    "Score: 100",
    "100",
] * 5


def test_gemba_extraction_acceptance():
    """Extraction fixtures hold and a 50-response transcript loses < 2%."""
    with criterion("gemba-extraction"):
        assert extract_gemba_score("I would score this translation 85.") == 85.0
        assert extract_gemba_score("Score: 90") == 90.0
        assert extract_gemba_score("1. The translation is fluent.") is None
        assert len(TRANSCRIPT) == 50
        rejected = sum(1 for reply in TRANSCRIPT if extract_gemba_score(reply) is None)
        assert rejected / len(TRANSCRIPT) < 0.02
