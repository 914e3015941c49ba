import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qe_bias.biasstats import (
    Judgment,
    PhiUndefined,
    aggregate_ratio,
    bootstrap_phi_test,
    error_rates,
    group_error_rate,
    judge_instance,
    log_ratio_p_value,
    phi,
    score_ratio,
    tie_rate,
)
from qe_bias.errors import NotEstimableError

from synthdata import unambiguous_instances

E, C, T = Judgment.ERROR, Judgment.CORRECT, Judgment.TIE_ERROR


def t_cdf_df2(t):
    # Closed-form Student t CDF for 2 degrees of freedom, derived by hand:
    # F(t) = 1/2 + t / (2 * sqrt(2 + t^2)). Independent of the implementation.
    return 0.5 + t / (2.0 * math.sqrt(2.0 + t * t))


class TestScoreRatio:
    def test_identity(self):
        assert score_ratio(0.95, 0.95) == 1.0

    def test_division(self):
        assert score_ratio(0.90, 0.95) == pytest.approx(0.9473684210526316)

    def test_zero_denominator_excluded(self):
        assert score_ratio(0.5, 0.0) is None


class TestAggregateRatio:
    def test_symmetric_sample_about_one(self):
        rs = aggregate_ratio([0.9, 1.0, 1.1, 0.95, 1.05])
        assert rs.mean == 1.0
        assert rs.t_p_value == 1.0
        assert rs.direction == "at_one"

    def test_degenerate_variance_at_null(self):
        rs = aggregate_ratio([1.0, 1.0, 1.0])
        assert rs.mean == 1.0
        assert rs.ci95_low == rs.ci95_high == 1.0
        assert rs.t_p_value == 1.0

    def test_degenerate_variance_off_null(self):
        rs = aggregate_ratio([0.9375] * 10)
        assert rs.mean == 0.9375
        assert rs.ci95_low == rs.ci95_high == 0.9375
        assert rs.t_p_value == 0.0
        assert rs.direction == "below_one"

    def test_against_t_distribution_oracle(self):
        # Frozen from the df=2 closed form (cross-checked by quadrature).
        rs = aggregate_ratio([0.90, 0.92, 0.94])
        mean = (0.90 + 0.92 + 0.94) / 3
        sd = math.sqrt(sum((x - mean) ** 2 for x in [0.90, 0.92, 0.94]) / 2)
        t = (mean - 1.0) / (sd / math.sqrt(3))
        oracle = 2.0 * min(t_cdf_df2(t), 1.0 - t_cdf_df2(t))
        assert rs.t_p_value == pytest.approx(oracle, abs=1e-12)
        assert rs.t_p_value == pytest.approx(0.020204102886728692, abs=1e-12)

    def test_ci_brackets_mean(self):
        rs = aggregate_ratio([0.8, 0.9, 1.0, 1.2])
        assert rs.ci95_low <= rs.mean <= rs.ci95_high

    def test_exclusions_counted(self):
        rs = aggregate_ratio([0.9, None, 1.1, None])
        assert rs.n_used == 2
        assert rs.n_excluded_zero_denominator == 2

    def test_empty_sample_undefined(self):
        rs = aggregate_ratio([])
        assert rs.n_used == 0
        assert rs.mean is None
        assert rs.t_p_value is None

    @given(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=30), st.randoms())
    @settings(max_examples=100)
    def test_permutation_invariant(self, ratios, rng):
        shuffled = list(ratios)
        rng.shuffle(shuffled)
        assert aggregate_ratio(shuffled) == aggregate_ratio(ratios)

    def test_log_scale_test_calibrates_where_raw_cannot(self):
        # Ratios of iid uniform scores: raw mean sits above 1 by Jensen,
        # while log ratios are symmetric about 0.
        import numpy as np

        rng = np.random.default_rng(7)
        ratios = list(rng.random(400) / rng.random(400))
        rs = aggregate_ratio(ratios)
        assert rs.t_p_value < 0.05  # raw test detects the structural bias
        assert log_ratio_p_value(ratios) > 0.05


class TestJudgeInstance:
    def setup_method(self):
        (self.inst,) = unambiguous_instances(1, 0)

    def test_strict_order_correct(self):
        assert judge_instance(self.inst, 0.9, 0.8) is Judgment.CORRECT

    def test_tie_is_error(self):
        assert judge_instance(self.inst, 0.8, 0.8) is Judgment.TIE_ERROR
        assert judge_instance(self.inst, 0.8, 0.8).is_error

    def test_strict_order_error(self):
        assert judge_instance(self.inst, 0.7, 0.9) is Judgment.ERROR

    def test_requires_unambiguous(self):
        from synthdata import ambiguous_instances

        (amb,) = ambiguous_instances(1)
        with pytest.raises(ValueError):
            judge_instance(amb, 0.9, 0.8)

    @given(st.integers(-10, 10), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    @settings(max_examples=200)
    def test_scale_invariance(self, k, a, b):
        # Powers of two keep the multiplication exact, so strict-order
        # comparisons are preserved bit-for-bit.
        c = 2.0**k
        assert judge_instance(self.inst, a, b) is judge_instance(self.inst, a * c, b * c)


class TestErrorRates:
    def test_simple_count(self):
        group_f, group_m, er_total = error_rates(
            [("F", E), ("F", C), ("F", C), ("F", C), ("M", C), ("M", C)]
        )
        assert group_error_rate(group_f) == 0.25
        assert group_error_rate(group_m) == 0.0
        assert er_total == pytest.approx(1 / 6)

    def test_all_correct(self):
        group_f, group_m, er_total = error_rates([("F", C), ("M", C)])
        assert group_error_rate(group_f) == 0.0
        assert group_error_rate(group_m) == 0.0
        assert er_total == 0.0

    def test_ties_count_as_errors(self):
        judgments = [("F", E), ("F", T), ("F", C), ("F", C)] + [("M", C)] * 4
        group_f, group_m, er_total = error_rates(judgments)
        assert group_error_rate(group_f) == 0.5
        assert group_error_rate(group_m) == 0.0
        assert er_total == 0.25
        assert group_f.ties == 1

    def test_empty_group_undefined(self):
        group_f, group_m, er_total = error_rates([("F", E)])
        assert group_m.n == 0
        assert group_error_rate(group_m) is None


class TestPhi:
    def test_ratio(self):
        assert phi(0.2, 0.1) == pytest.approx(2.0)

    def test_balanced_degenerate(self):
        assert phi(0.0, 0.0) is PhiUndefined.BALANCED

    def test_infinite_degenerate(self):
        assert phi(0.3, 0.0) is PhiUndefined.INFINITE


class TestTieRate:
    def test_count(self):
        assert tie_rate([T, C, C, C]) == 0.25

    def test_no_ties(self):
        assert tie_rate([E, C]) == 0.0

    def test_empty_undefined(self):
        assert tie_rate([]) is None


FIXTURE_6 = [("F", E), ("F", E), ("F", C), ("M", E), ("M", C), ("M", C)]


def exhaustive_bootstrap_p(judgments):
    """Oracle: enumerate every equally likely resample-with-replacement."""
    n = len(judgments)
    valid = 0
    le = 0
    for tup in itertools.product(range(n), repeat=n):
        nf = nm = ef = em = 0
        for i in tup:
            group, judgment = judgments[i]
            if group == "F":
                nf += 1
                ef += judgment.is_error
            else:
                nm += 1
                em += judgment.is_error
        if nf == 0 or nm == 0 or em == 0:
            continue
        valid += 1
        if (ef / nf) / (em / nm) <= 1.0:
            le += 1
    return le / valid


class TestBootstrapPhi:
    def test_matches_exhaustive_oracle(self):
        oracle = exhaustive_bootstrap_p(FIXTURE_6)
        assert oracle == pytest.approx(0.44279786603438054, abs=1e-12)
        result = bootstrap_phi_test(FIXTURE_6, resamples=10000, seed=42)
        assert abs(result.p_value - oracle) <= 0.02
        assert result.phi_point == pytest.approx(2.0)

    def test_bitwise_reproducible(self):
        a = bootstrap_phi_test(FIXTURE_6, resamples=2000, seed=123)
        b = bootstrap_phi_test(FIXTURE_6, resamples=2000, seed=123)
        assert a == b

    def test_seed_changes_draws(self):
        a = bootstrap_phi_test(FIXTURE_6, resamples=2000, seed=1)
        b = bootstrap_phi_test(FIXTURE_6, resamples=2000, seed=2)
        assert a.p_value != b.p_value

    def test_all_errors_both_groups(self):
        judgments = [("F", E)] * 3 + [("M", E)] * 3
        result = bootstrap_phi_test(judgments, resamples=500, seed=0)
        assert result.p_value == 1.0
        assert result.phi_point == 1.0

    def test_not_estimable_when_m_errorless(self):
        judgments = [("F", E), ("F", E), ("M", C), ("M", C)]
        with pytest.raises(NotEstimableError, match="not estimable"):
            bootstrap_phi_test(judgments, resamples=200, seed=0)

    def test_skips_counted(self):
        result = bootstrap_phi_test(FIXTURE_6, resamples=5000, seed=9)
        assert result.n_skipped > 0
        assert result.n_skipped + 0 <= result.n_resamples

    def test_two_sided_variant(self):
        one = bootstrap_phi_test(FIXTURE_6, resamples=5000, seed=5)
        two = bootstrap_phi_test(FIXTURE_6, resamples=5000, seed=5, two_sided=True)
        assert two.p_value <= 1.0
        assert two.p_value == pytest.approx(min(1.0, 2 * min(one.p_value, 1 - one.p_value)), abs=0.05)

    def test_seed_required_and_resamples_positive(self):
        with pytest.raises(ValueError):
            bootstrap_phi_test(FIXTURE_6, resamples=0, seed=1)
        with pytest.raises(TypeError):
            bootstrap_phi_test(FIXTURE_6, resamples=100)
