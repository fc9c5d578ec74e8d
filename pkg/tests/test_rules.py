"""Tests for the interval decision rules and beta-binomial posteriors.

Expected values are frozen from closed forms: integer-parameter beta CDFs
reduce to binomial tail sums, e.g. Beta(1,4) has CDF 1-(1-x)^4 and
Beta(3,2) has CDF x^3(4-3x), so the posterior interval masses below are
exact hand-computable references.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ci3p3.rules import (
    BetaParams,
    Decision,
    DoseObservation,
    EquivalenceInterval,
    UNIFORM_PRIOR,
    beta_posterior_cdf,
    decision_table,
    i3p3_decision,
    is_unacceptably_toxic,
    prob_above_interval,
    prob_below_interval,
    prob_exceeds,
    prob_in_interval,
)

EI = EquivalenceInterval(0.30, 0.05, 0.05)


def binom_cdf_complement(x, a, b):
    # For integer a, b: P(Beta(a,b) <= x) = sum_{k=a}^{a+b-1} C(a+b-1,k) x^k (1-x)^(a+b-1-k)
    n = a + b - 1
    return sum(math.comb(n, k) * x**k * (1 - x) ** (n - k) for k in range(a, n + 1))


class TestInterval:
    def test_bounds(self):
        assert EI.lower == pytest.approx(0.25)
        assert EI.upper == pytest.approx(0.35)

    @pytest.mark.parametrize(
        "target,lo,hi",
        [(0.0, 0.05, 0.05), (1.0, 0.05, 0.05), (0.3, 0.3, 0.05), (0.3, 0.05, 0.7), (0.3, -0.1, 0.05)],
    )
    def test_invalid(self, target, lo, hi):
        with pytest.raises(ValueError):
            EquivalenceInterval(target, lo, hi)

    def test_observation_invalid(self):
        with pytest.raises(ValueError):
            DoseObservation(n=3, y=4)
        with pytest.raises(ValueError):
            DoseObservation(n=-1, y=0)

    def test_beta_params_invalid(self):
        with pytest.raises(ValueError):
            BetaParams(0.0, 1.0)


class TestDecision:
    @pytest.mark.parametrize(
        "y,n,expected",
        [
            (0, 3, Decision.ESCALATE),
            (1, 3, Decision.STAY),  # 1/3 inside
            (2, 3, Decision.DEESCALATE),  # 2/3 above, 1/3 inside
            (3, 6, Decision.DEESCALATE),  # 1/2 above, 2/6 inside
            (1, 1, Decision.STAY),  # 1/1 above but 0/1 below
            (1, 2, Decision.STAY),  # 1/2 above but 0/2 below
            (2, 6, Decision.STAY),  # 1/3 inside
            (0, 12, Decision.ESCALATE),
            (3, 12, Decision.STAY),  # exactly on the lower bound counts as inside
            (2, 4, Decision.DEESCALATE),  # 0.5 above, 1/4 exactly on lower bound: not below
        ],
    )
    def test_rule(self, y, n, expected):
        assert i3p3_decision(DoseObservation(n=n, y=y), EI) is expected

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            i3p3_decision(DoseObservation(n=0, y=0), EI)

    @given(n=st.integers(1, 30), y_frac=st.floats(0, 1))
    def test_monotone_in_y(self, n, y_frac):
        y = min(n, int(y_frac * (n + 1)))
        if y + 1 > n:
            return
        d1 = i3p3_decision(DoseObservation(n=n, y=y), EI)
        d2 = i3p3_decision(DoseObservation(n=n, y=y + 1), EI)
        assert d1.severity <= d2.severity


class TestPosteriors:
    def test_uniform_prior_interval(self):
        assert prob_in_interval(DoseObservation(0, 0), UNIFORM_PRIOR, EI) == pytest.approx(0.10, abs=1e-12)

    def test_beta_1_4_closed_form(self):
        # posterior after 0/3 is Beta(1,4); CDF is 1-(1-x)^4
        expected = 0.75**4 - 0.65**4
        got = prob_in_interval(DoseObservation(n=3, y=0), UNIFORM_PRIOR, EI)
        assert got == pytest.approx(expected, abs=1e-9)

    def test_beta_3_2_closed_form(self):
        # posterior after 2/3 is Beta(3,2); CDF is x^3(4-3x)
        cdf = lambda x: x**3 * (4 - 3 * x)
        got = prob_in_interval(DoseObservation(n=3, y=2), UNIFORM_PRIOR, EI)
        assert got == pytest.approx(cdf(0.35) - cdf(0.25), abs=1e-9)

    def test_exceeds_uniform(self):
        assert prob_exceeds(DoseObservation(0, 0), UNIFORM_PRIOR, 0.3) == pytest.approx(0.7, abs=1e-12)

    def test_exceeds_3_of_3(self):
        # posterior Beta(4,1); CDF is x^4
        got = prob_exceeds(DoseObservation(n=3, y=3), UNIFORM_PRIOR, 0.3)
        assert got == pytest.approx(1 - 0.3**4, abs=1e-9)

    def test_exceeds_3_of_6(self):
        got = prob_exceeds(DoseObservation(n=6, y=3), UNIFORM_PRIOR, 0.3)
        assert got == pytest.approx(1 - binom_cdf_complement(0.3, 4, 4), abs=1e-9)

    @given(y=st.integers(0, 20), extra=st.integers(0, 20))
    @settings(max_examples=60)
    def test_integer_cdf_matches_binomial_sum(self, y, extra):
        n = y + extra
        a, b = 1 + y, 1 + n - y
        assert beta_posterior_cdf(0.3, a, b) == pytest.approx(
            binom_cdf_complement(0.3, a, b), abs=1e-9
        )

    @given(y=st.integers(0, 30), extra=st.integers(0, 30))
    @settings(max_examples=60)
    def test_partition_sums_to_one(self, y, extra):
        obs = DoseObservation(n=y + extra, y=y)
        total = (
            prob_below_interval(obs, UNIFORM_PRIOR, EI)
            + prob_in_interval(obs, UNIFORM_PRIOR, EI)
            + prob_above_interval(obs, UNIFORM_PRIOR, EI)
        )
        assert total == pytest.approx(1.0, abs=1e-12)

    @given(n=st.integers(1, 25), y=st.integers(0, 24))
    @settings(max_examples=60)
    def test_exceeds_increasing_in_y(self, n, y):
        y = min(y, n - 1)
        lo = prob_exceeds(DoseObservation(n=n, y=y), UNIFORM_PRIOR, 0.3)
        hi = prob_exceeds(DoseObservation(n=n, y=y + 1), UNIFORM_PRIOR, 0.3)
        assert hi > lo

    @given(n=st.integers(1, 25), y=st.integers(0, 24))
    @settings(max_examples=60)
    def test_exceeds_decreasing_in_n(self, n, y):
        y = min(y, n - 1)  # keep y < n so adding a clean patient shifts mass down
        big = prob_exceeds(DoseObservation(n=n + 1, y=y), UNIFORM_PRIOR, 0.3)
        small = prob_exceeds(DoseObservation(n=n, y=y), UNIFORM_PRIOR, 0.3)
        assert big < small


class TestUnacceptable:
    def test_three_of_three(self):
        assert is_unacceptably_toxic(DoseObservation(n=3, y=3), 0.3, 0.95)

    def test_three_of_six(self):
        assert not is_unacceptably_toxic(DoseObservation(n=6, y=3), 0.3, 0.95)

    def test_small_n_gate(self):
        assert not is_unacceptably_toxic(DoseObservation(n=2, y=2), 0.3, 0.95)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            is_unacceptably_toxic(DoseObservation(n=3, y=3), 0.3, 1.0)


class TestDecisionTable:
    def test_n3_column(self):
        table = decision_table(EI, n_max=12)
        got = [table.decision(3, y) for y in range(4)]
        assert got == [
            Decision.ESCALATE,
            Decision.STAY,
            Decision.DEESCALATE,
            Decision.DEESCALATE_UNACCEPTABLE,
        ]

    def test_spot_cells(self):
        table = decision_table(EI, n_max=12)
        assert table.decision(6, 2) is Decision.STAY
        assert table.decision(12, 0) is Decision.ESCALATE

    def test_monotone_in_y_all_columns(self):
        table = decision_table(EI, n_max=30)
        for n in range(1, 31):
            severities = [table.decision(n, y).severity for y in range(n + 1)]
            assert severities == sorted(severities)

    def test_du_never_below_min_n(self):
        table = decision_table(EI, n_max=12)
        for n in (1, 2):
            for y in range(n + 1):
                assert table.decision(n, y) is not Decision.DEESCALATE_UNACCEPTABLE

    def test_csv_roundtrip_shape(self):
        table = decision_table(EI, n_max=6)
        lines = table.to_csv().strip().splitlines()
        assert lines[0] == "n,y,decision"
        # rows: sum_{n=1..6} (n+1) = 27
        assert len(lines) == 1 + 27
        assert lines[1] == "1,0,E"

    def test_text_grid_layout(self):
        text = decision_table(EI, n_max=4).to_text()
        lines = text.splitlines()
        assert len(lines) == 1 + 5  # header + y rows 0..4
        assert "E" in lines[1]

    def test_bad_lookup(self):
        table = decision_table(EI, n_max=6)
        with pytest.raises(ValueError):
            table.decision(7, 0)
        with pytest.raises(ValueError):
            table.decision(3, 4)
