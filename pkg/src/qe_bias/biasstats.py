"""Bias statistics over normalized scores.

Two families of measurements:

* Ambiguous conditions compare the two valid variants of one source via
  the per-instance score ratio. Ratios aggregate to a mean with a normal
  95% CI and a one-sample t-test against the parity value 1. Because the
  mean of a ratio of independent scores sits above 1 even for a perfectly
  symmetric scorer (Jensen's inequality), the summary also carries a
  t-test on log ratios against log parity, which is the calibrated
  no-signal test; both p-values are reported.

* Unambiguous conditions judge whether the scorer ranks the correct
  gender inflection above the incorrect one. Ties count as errors. Error
  rates aggregate per referent-gender group; their ratio (feminine over
  masculine) is the multi-group comparison statistic, with significance
  from paired bootstrap resampling over instances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .corpus import UNAMBIGUOUS_CONDITIONS, EvaluationInstance
from .errors import NotEstimableError


class Judgment(enum.Enum):
    CORRECT = "correct"
    ERROR = "error"
    TIE_ERROR = "tie_error"

    @property
    def is_error(self) -> bool:
        return self is not Judgment.CORRECT


class PhiUndefined(enum.Enum):
    """Distinguishes the two degenerate error-ratio cases."""

    BALANCED = "undefined_balanced"  # no errors in either group
    INFINITE = "undefined_infinite"  # feminine errors, zero masculine errors


DIRECTION_BELOW = "below_one"
DIRECTION_ABOVE = "above_one"
DIRECTION_AT = "at_one"


@dataclass(frozen=True)
class RatioSummary:
    n_used: int
    n_excluded_zero_denominator: int
    mean: float | None
    ci95_low: float | None
    ci95_high: float | None
    t_p_value: float | None
    direction: str | None
    log_t_p_value: float | None = None


@dataclass(frozen=True)
class GroupOutcome:
    group: str
    n: int
    errors: int
    ties: int


@dataclass(frozen=True)
class BiasSummary:
    er_total: float | None
    er_f: float | None
    er_m: float | None
    phi: float | PhiUndefined | None
    phi_p_value: float | None
    tie_rate: float | None
    ratio: RatioSummary | None


@dataclass(frozen=True)
class BootstrapPhi:
    p_value: float
    phi_point: float | PhiUndefined
    n_resamples: int
    n_skipped: int


def score_ratio(numerator: float, denominator: float) -> float | None:
    """Per-instance score ratio; a zero denominator yields the excluded marker None."""
    if denominator == 0.0:
        return None
    return numerator / denominator


def _t_test_two_sided(values, null_value: float) -> tuple[float, float, float]:
    """Returns (mean, sample std dev, two-sided p) for a one-sample t-test.

    Zero-variance convention: p is 1.0 when the mean equals the null value
    and 0.0 otherwise. Samples of size one use the same convention.
    """
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        sd = 0.0
    else:
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    if sd == 0.0:
        return mean, sd, 1.0 if mean == null_value else 0.0
    t = (mean - null_value) / (sd / math.sqrt(n))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), n - 1))
    return mean, sd, min(1.0, p)


def aggregate_ratio(ratios, null_value: float = 1.0) -> RatioSummary:
    """Aggregate per-instance ratios (None entries are excluded and counted)."""
    used = [r for r in ratios if r is not None]
    n_excluded = sum(1 for r in ratios if r is None)
    n = len(used)
    if n == 0:
        return RatioSummary(0, n_excluded, None, None, None, None, None, None)
    mean, sd, p = _t_test_two_sided(used, null_value)
    half = 1.96 * sd / math.sqrt(n)
    if mean > null_value:
        direction = DIRECTION_ABOVE
    elif mean < null_value:
        direction = DIRECTION_BELOW
    else:
        direction = DIRECTION_AT
    log_p = log_ratio_p_value(used, null_value) if null_value > 0 else None
    return RatioSummary(
        n_used=n,
        n_excluded_zero_denominator=n_excluded,
        mean=mean,
        ci95_low=mean - half,
        ci95_high=mean + half,
        t_p_value=p,
        direction=direction,
        log_t_p_value=log_p,
    )


def log_ratio_p_value(ratios, null_value: float = 1.0) -> float | None:
    """Two-sided t-test of log ratios against log(null_value).

    This is the calibrated test for "no gender signal": under a scorer
    with exchangeable variant scores the log ratio is symmetric about 0.
    """
    positive = [r for r in ratios if r is not None and r > 0]
    if not positive:
        return None
    _, _, p = _t_test_two_sided([math.log(r) for r in positive], math.log(null_value))
    return p


def judge_instance(
    instance: EvaluationInstance, score_correct: float, score_incorrect: float
) -> Judgment:
    """Did the scorer rank the correct inflection above the incorrect one?

    Equal scores are tie errors: the scorer failed to select the correct
    form, so they count as errors in every rate built on judgments.
    """
    if instance.condition not in UNAMBIGUOUS_CONDITIONS:
        raise ValueError(f"instance {instance.id} is not an unambiguous instance")
    if score_correct > score_incorrect:
        return Judgment.CORRECT
    if score_correct == score_incorrect:
        return Judgment.TIE_ERROR
    return Judgment.ERROR


def error_rates(judgments) -> tuple[GroupOutcome, GroupOutcome, float | None]:
    """Per-group outcomes and the pooled error rate.

    judgments: iterable of (source_group, Judgment) with group in {F, M}.
    """
    counts = {"F": [0, 0, 0], "M": [0, 0, 0]}  # n, errors, ties
    for group, judgment in judgments:
        if group not in counts:
            raise ValueError(f"unknown group {group!r}")
        counts[group][0] += 1
        if judgment.is_error:
            counts[group][1] += 1
        if judgment is Judgment.TIE_ERROR:
            counts[group][2] += 1
    group_f = GroupOutcome("F", *counts["F"])
    group_m = GroupOutcome("M", *counts["M"])
    n_total = group_f.n + group_m.n
    er_total = (group_f.errors + group_m.errors) / n_total if n_total else None
    return group_f, group_m, er_total


def group_error_rate(outcome: GroupOutcome) -> float | None:
    return outcome.errors / outcome.n if outcome.n else None


def phi(er_f: float, er_m: float) -> float | PhiUndefined:
    """Ratio of the feminine to the masculine group error rate; 1 is parity."""
    if er_m > 0:
        return er_f / er_m
    return PhiUndefined.INFINITE if er_f > 0 else PhiUndefined.BALANCED


def tie_rate(judgments) -> float | None:
    items = list(judgments)
    if not items:
        return None
    return sum(1 for j in items if j is Judgment.TIE_ERROR) / len(items)


def bootstrap_phi_test(
    judgments,
    resamples: int,
    seed: int,
    two_sided: bool = False,
) -> BootstrapPhi:
    """Paired bootstrap significance test for the group error-rate ratio.

    Instances are resampled with replacement, keeping each instance's
    group and judgment together. Resamples where the ratio is not
    computable (a group absent, or zero masculine errors) are skipped and
    counted. The default one-sided p is the fraction of valid resamples
    with ratio <= 1, i.e. small p means the feminine error rate is
    significantly higher. Deterministic for a fixed seed.
    """
    items = list(judgments)
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    n = len(items)
    if n == 0:
        raise NotEstimableError("phi not estimable: no judgments")
    is_f = np.array([group == "F" for group, _ in items], dtype=bool)
    is_err = np.array([judgment.is_error for _, judgment in items], dtype=bool)

    group_f, group_m, _ = error_rates(items)
    er_f = group_error_rate(group_f)
    er_m = group_error_rate(group_m)
    if er_f is None or er_m is None:
        raise NotEstimableError("phi not estimable: a group has no instances")
    phi_point = phi(er_f, er_m)

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    f_sel = is_f[idx]
    err_sel = is_err[idx]
    nf = f_sel.sum(axis=1)
    nm = n - nf
    ef = (f_sel & err_sel).sum(axis=1)
    em = ((~f_sel) & err_sel).sum(axis=1)
    valid = (nf > 0) & (nm > 0) & (em > 0)
    n_valid = int(valid.sum())
    n_skipped = resamples - n_valid
    if n_valid == 0:
        raise NotEstimableError("phi not estimable: every resample had an undefined ratio")
    with np.errstate(divide="ignore", invalid="ignore"):
        phis = (ef[valid] / nf[valid]) / (em[valid] / nm[valid])
    frac_le = float(np.mean(phis <= 1.0))
    if two_sided:
        frac_ge = float(np.mean(phis >= 1.0))
        p = min(1.0, 2.0 * min(frac_le, frac_ge))
    else:
        p = frac_le
    return BootstrapPhi(p_value=p, phi_point=phi_point, n_resamples=resamples, n_skipped=n_skipped)
