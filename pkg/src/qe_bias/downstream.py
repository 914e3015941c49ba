"""Downstream uses of a quality scorer: filtering, pairing checks, reranking.

Three simulations live here. Threshold filtering builds per-group
retention curves (share of instances scoring at least each threshold).
The two-stage counterfactual filter keeps translation pairs that are
correctly inflected on both sides and of matching BLEU quality band,
confirming band-level consistency with a Wilcoxon signed-rank test.
N-best reranking picks the top-scoring hypothesis per source and accounts
for gender representation through unique-word matches against the
feminine and masculine references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections import Counter

from .corpus import EvaluationInstance
from .tokenizer import tokenize

# ---------------------------------------------------------------------------
# Retention curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RetentionCurve:
    thresholds: tuple[float, ...]
    retained_fraction_by_group: dict[str, tuple[float, ...]]
    gap: tuple[float, ...] | None  # retained_M - retained_F per threshold


def retention_curve(scores_by_group: dict[str, list[float]], thresholds) -> RetentionCurve:
    """Share of each group scoring at least each threshold (closed comparison)."""
    thresholds = tuple(thresholds)
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    retained: dict[str, tuple[float, ...]] = {}
    for group, scores in scores_by_group.items():
        if not scores:
            raise ValueError(f"empty score list for group {group!r}")
        n = len(scores)
        retained[group] = tuple(sum(1 for s in scores if s >= t) / n for t in thresholds)
    gap = None
    if "F" in retained and "M" in retained:
        gap = tuple(m - f for m, f in zip(retained["M"], retained["F"]))
    return RetentionCurve(thresholds, retained, gap)


def threshold_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid built from integer steps to dodge float accumulation."""
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(count + 1)]


# ---------------------------------------------------------------------------
# Sentence BLEU
# ---------------------------------------------------------------------------


def _ngram_counts(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def sentence_bleu(hypothesis: str, reference: str, max_order: int = 4) -> float:
    """Sentence-level BLEU in [0, 100] with add-one smoothing for n >= 2.

    Uniform weights over n-gram orders, brevity penalty exp(1 - r/c) when
    the hypothesis is shorter than the reference, and the shared tokenizer.
    Unigram precision is unsmoothed, so zero unigram overlap gives 0.
    """
    hyp = tokenize(hypothesis)
    ref = tokenize(reference)
    log_sum = 0.0
    for order in range(1, max_order + 1):
        hyp_counts = _ngram_counts(hyp, order)
        ref_counts = _ngram_counts(ref, order)
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(0, len(hyp) - order + 1)
        if order == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += math.log(precision)
    score = math.exp(log_sum / max_order)
    c, r = len(hyp), len(ref)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * bp * score


# ---------------------------------------------------------------------------
# Quality bands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QualityBand:
    name: str
    low: float  # inclusive
    high: float  # exclusive, except the top band which includes 100


QUALITY_BANDS = (
    QualityBand("Poor", 0.0, 20.0),
    QualityBand("Fair", 20.0, 30.0),
    QualityBand("Good", 30.0, 40.0),
    QualityBand("VeryGood", 40.0, 50.0),
    QualityBand("Excellent", 50.0, 100.0),
)


def quality_band(bleu: float) -> QualityBand:
    if not 0.0 <= bleu <= 100.0:
        raise ValueError(f"BLEU {bleu} outside [0, 100]")
    for band in QUALITY_BANDS[:-1]:
        if band.low <= bleu < band.high:
            return band
    return QUALITY_BANDS[-1]


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------


def _doubled_ranks(values: list[float]) -> list[int]:
    """Average ranks of |values|, doubled so ties stay integral."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    doubled = [0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            doubled[order[k]] = i + j + 2  # 2 * average of 1-based positions
        i = j + 1
    return doubled


def wilcoxon_signed_rank(paired_a, paired_b, exact_max_n: int = 25) -> float:
    """Two-sided signed-rank p-value for paired samples.

    Zero differences are dropped; ties get average ranks. The null
    distribution is exact (enumerated by dynamic programming over rank
    sums) up to exact_max_n effective pairs, and a normal approximation
    with continuity correction beyond. All differences zero gives 1.0.
    """
    if len(paired_a) != len(paired_b):
        raise ValueError("paired samples must have equal length")
    if not paired_a:
        raise ValueError("paired samples must be non-empty")
    diffs = [a - b for a, b in zip(paired_a, paired_b) if a != b]
    n = len(diffs)
    if n == 0:
        return 1.0
    doubled = _doubled_ranks([abs(d) for d in diffs])
    w2 = sum(d2 for d2, diff in zip(doubled, diffs) if diff > 0)
    if n <= exact_max_n:
        total = sum(doubled)
        ways = [0] * (total + 1)
        ways[0] = 1
        for d2 in doubled:
            for s in range(total, d2 - 1, -1):
                ways[s] += ways[s - d2]
        count_le = sum(ways[: w2 + 1])
        count_ge = sum(ways[w2:])
        return min(1.0, 2.0 * min(count_le, count_ge) / 2**n)
    w_plus = w2 / 2.0
    mean = n * (n + 1) / 4.0
    var = sum((d2 / 2.0) ** 2 for d2 in doubled) / 4.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return math.erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Two-stage counterfactual filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GtPair:
    """A counterfactual instance pair with its machine translations."""

    instance_f: EvaluationInstance
    instance_m: EvaluationInstance
    translation_f: str
    translation_m: str
    inflection_ok_f: bool
    inflection_ok_m: bool


@dataclass(frozen=True)
class BandStats:
    band: str
    n_f_stage1: int
    n_m_stage1: int
    n_pairs_stage2: int
    wilcoxon_p: float | None


@dataclass(frozen=True)
class FilterStats:
    n_pairs_in: int
    n_f_inflection_ok: int
    n_m_inflection_ok: int
    n_pairs_stage1: int
    n_pairs_stage2: int
    bands: tuple[BandStats, ...]


@dataclass(frozen=True)
class RetainedPair:
    pair: GtPair
    bleu_f: float
    bleu_m: float
    band: str


def gt_filter(pairs: list[GtPair]) -> tuple[list[RetainedPair], FilterStats]:
    """Two-stage filter for machine-translated counterfactual pairs.

    Stage 1 drops pairs where either translation lacks the correct gender
    inflection (flags are input annotations). Stage 2 scores each side
    with sentence BLEU against its reference, assigns quality bands, and
    keeps pairs whose sides fall in the same band. Within each band a
    Wilcoxon signed-rank test over the retained paired BLEU values checks
    that quality does not differ between the gender groups.
    """
    n_f_ok = sum(1 for p in pairs if p.inflection_ok_f)
    n_m_ok = sum(1 for p in pairs if p.inflection_ok_m)
    stage1 = [p for p in pairs if p.inflection_ok_f and p.inflection_ok_m]

    side_counts = {b.name: [0, 0] for b in QUALITY_BANDS}
    scored = []
    for p in stage1:
        ref_f = p.instance_f.variants[p.instance_f.correct_variant]
        ref_m = p.instance_m.variants[p.instance_m.correct_variant]
        bleu_f = sentence_bleu(p.translation_f, ref_f)
        bleu_m = sentence_bleu(p.translation_m, ref_m)
        band_f = quality_band(bleu_f)
        band_m = quality_band(bleu_m)
        side_counts[band_f.name][0] += 1
        side_counts[band_m.name][1] += 1
        scored.append((p, bleu_f, bleu_m, band_f, band_m))

    retained = [
        RetainedPair(p, bleu_f, bleu_m, band_f.name)
        for p, bleu_f, bleu_m, band_f, band_m in scored
        if band_f.name == band_m.name
    ]

    band_stats = []
    for band in QUALITY_BANDS:
        in_band = [rp for rp in retained if rp.band == band.name]
        if in_band:
            p_value = wilcoxon_signed_rank(
                [rp.bleu_f for rp in in_band], [rp.bleu_m for rp in in_band]
            )
        else:
            p_value = None
        band_stats.append(
            BandStats(
                band=band.name,
                n_f_stage1=side_counts[band.name][0],
                n_m_stage1=side_counts[band.name][1],
                n_pairs_stage2=len(in_band),
                wilcoxon_p=p_value,
            )
        )
    stats = FilterStats(
        n_pairs_in=len(pairs),
        n_f_inflection_ok=n_f_ok,
        n_m_inflection_ok=n_m_ok,
        n_pairs_stage1=len(stage1),
        n_pairs_stage2=len(retained),
        bands=tuple(band_stats),
    )
    return retained, stats


# ---------------------------------------------------------------------------
# N-best reranking and gender-representation accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CandidateSet:
    instance_id: str
    candidates: tuple[str, ...]
    scores: tuple[float, ...]
    f_unique_words: frozenset[str]
    m_unique_words: frozenset[str]

    def __post_init__(self):
        if len(self.candidates) != len(self.scores):
            raise ValueError(f"{self.instance_id}: candidates and scores differ in length")
        if not self.candidates:
            raise ValueError(f"{self.instance_id}: empty candidate list")
        if self.f_unique_words & self.m_unique_words:
            raise ValueError(f"{self.instance_id}: unique word sets overlap")


MATCH_F = "F"
MATCH_M = "M"
MATCH_BOTH = "both"
MATCH_NONE = "none"


def rerank(candidate_set: CandidateSet) -> tuple[int, str]:
    """Index and text of the highest-scoring candidate; ties keep the lowest index."""
    best = 0
    for i, score in enumerate(candidate_set.scores):
        if score > candidate_set.scores[best]:
            best = i
    return best, candidate_set.candidates[best]


def unique_word_sets(h_f: str, h_m: str, fold_case: bool = False):
    """Tokens unique to each reference; disjoint by construction."""
    tf = set(tokenize(h_f, fold_case=fold_case))
    tm = set(tokenize(h_m, fold_case=fold_case))
    return frozenset(tf - tm), frozenset(tm - tf)


def gender_match(hypothesis: str, f_unique, m_unique, fold_case: bool = False) -> str:
    """Which reference's unique words the hypothesis contains."""
    tokens = set(tokenize(hypothesis, fold_case=fold_case))
    has_f = bool(tokens & set(f_unique))
    has_m = bool(tokens & set(m_unique))
    if has_f and has_m:
        return MATCH_BOTH
    if has_f:
        return MATCH_F
    if has_m:
        return MATCH_M
    return MATCH_NONE


@dataclass(frozen=True)
class DeltaM:
    """Gender-representation gap: positive favors feminine matches."""

    percentage_points: float
    count_f: int
    count_m: int
    count_both: int
    count_none: int
    n: int


def delta_m(labels) -> DeltaM:
    """Difference between feminine and masculine match counts, in points per 100.

    Labels 'both' and 'none' contribute to neither count; raw counts ride
    along so the difference is recoverable on either reading.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be non-empty")
    counts = Counter(labels)
    n = len(labels)
    value = 100.0 * (counts[MATCH_F] - counts[MATCH_M]) / n
    return DeltaM(
        percentage_points=value,
        count_f=counts[MATCH_F],
        count_m=counts[MATCH_M],
        count_both=counts[MATCH_BOTH],
        count_none=counts[MATCH_NONE],
        n=n,
    )
