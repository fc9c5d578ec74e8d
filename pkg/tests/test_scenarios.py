"""Tests for scenario construction and ground-truth classification.

Expected probabilities for the odds-interaction generator come from
evaluating the formula by hand: p0 = pa + pb - pa*pb, odds scaled by
exp(eta), then mapped back through p = odds / (1 + odds).
"""

import math

import pytest

from ci3p3.rules import EquivalenceInterval
from ci3p3.scenarios import (
    INTERACTION_COEFFS,
    SINGLE_AGENT_CURVES,
    ScenarioMatrix,
    builtin_study1,
    builtin_study2,
    classification_histogram,
    classify_truth,
    combine,
    matrix_from_csv,
    matrix_to_csv,
    scenario_from_json,
    scenario_suite,
    scenario_to_json,
)

EI = EquivalenceInterval(0.30, 0.05, 0.05)


class TestCombine:
    def test_independence(self):
        m = combine([0.15], [0.10], 0.0)
        assert m.prob((1, 1)) == pytest.approx(0.15 + 0.10 - 0.15 * 0.10, abs=1e-12)

    def test_synergy(self):
        odds0 = 0.235 / 0.765
        expected = odds0 * math.exp(0.7) / (1 + odds0 * math.exp(0.7))
        m = combine([0.15], [0.10], 0.7)
        assert m.prob((1, 1)) == pytest.approx(expected, abs=1e-9)
        assert m.prob((1, 1)) == pytest.approx(0.3822, abs=5e-5)

    def test_protective(self):
        m = combine([0.15], [0.10], -2.0)
        assert m.prob((1, 1)) == pytest.approx(0.0399, abs=5e-5)

    def test_monotone_in_eta(self):
        lo = combine([0.2, 0.4], [0.1, 0.3], -0.5)
        hi = combine([0.2, 0.4], [0.1, 0.3], -0.4)
        for c in lo.grid.coords():
            assert hi.prob(c) > lo.prob(c)

    def test_output_monotone(self):
        m = combine([0.05, 0.2, 0.6], [0.1, 0.5], 1.3)
        for i in range(1, 3):
            for j in range(1, 3):
                assert m.prob((i + 1, j)) >= m.prob((i, j))
            assert m.prob((i, 2)) >= m.prob((i, 1))

    def test_rejects_bad_curves(self):
        with pytest.raises(ValueError):
            combine([0.3, 0.2], [0.1], 0.0)  # decreasing
        with pytest.raises(ValueError):
            combine([0.0, 0.2], [0.1], 0.0)  # boundary probability

    def test_matrix_validation(self):
        with pytest.raises(ValueError):
            ScenarioMatrix("bad", ((0.3, 0.1),))  # decreasing row
        with pytest.raises(ValueError):
            ScenarioMatrix("bad", ((0.3,), (0.1,)))  # decreasing column


class TestStudy1:
    def test_count_and_shape(self):
        suite = builtin_study1()
        assert len(suite) == 8
        assert all(m.grid.levels_a == m.grid.levels_b == 4 for m in suite)

    def test_spot_values(self):
        suite = builtin_study1()
        assert suite[0].prob((1, 1)) == pytest.approx(0.04)
        assert suite[7].prob((4, 4)) == pytest.approx(0.40)
        assert suite[2].prob((2, 2)) == pytest.approx(0.35)

    def test_scenario3_mtdcs(self):
        cls = classify_truth(builtin_study1()[2], EI)
        assert cls.mtdc_set == {(1, 3), (2, 1), (2, 2)}

    def test_scenario2_fallback(self):
        cls = classify_truth(builtin_study1()[1], EI)
        assert cls.mtdc_set == {(4, 4)}
        assert cls.category == "all_safe"

    def test_scenario4_all_toxic(self):
        cls = classify_truth(builtin_study1()[3], EI)
        assert cls.category == "all_toxic"
        assert cls.mtdc_set == frozenset()
        assert cls.over_set == frozenset(builtin_study1()[3].grid.coords())

    def test_classifier_agrees_with_published_mtdcs(self):
        for m in builtin_study1():
            cls = classify_truth(m, EI)
            assert cls.mtdc_set == m.reference_mtdcs


class TestStudy2:
    def test_count_and_labels(self):
        suite = builtin_study2()
        assert len(suite) == 100
        assert suite[0].label == "study2/000"
        assert suite[99].label == "study2/099"

    def test_enumeration_order(self):
        # index = a_curve * 20 + b_curve * 4 + eta_index
        suite = builtin_study2()
        idx = 1 * 20 + 2 * 4 + 3  # curve 2 for A, curve 3 for B, eta=0.7
        expected = combine(SINGLE_AGENT_CURVES[1], SINGLE_AGENT_CURVES[2], INTERACTION_COEFFS[3])
        assert suite[idx].probs == expected.probs

    def test_top_corner_value(self):
        # equal curves, strong synergy: pa = pb = 0.6 -> p0 = 0.84
        suite = builtin_study2()
        m = suite[0 * 20 + 0 * 4 + 3]
        odds = 0.84 / 0.16 * math.exp(0.7)
        assert m.prob((4, 4)) == pytest.approx(odds / (1 + odds), abs=1e-9)
        assert m.prob((4, 4)) == pytest.approx(0.9136, abs=5e-5)

    def test_histogram_matches_published_summary(self):
        hist = classification_histogram(builtin_study2(), EI)
        assert hist == {
            "all_safe": 13,
            "1": 18,
            "2": 24,
            "3": 5,
            ">3": 18,
            "all_toxic": 22,
        }

    def test_suite_lookup(self):
        assert len(scenario_suite("study1")) == 8
        assert len(scenario_suite("study2")) == 100
        with pytest.raises(ValueError):
            scenario_suite("study3")


class TestClassification:
    def test_partitions_grid(self):
        for m in builtin_study2()[::7]:
            cls = classify_truth(m, EI)
            coords = set(m.grid.coords())
            assert cls.mtdc_set | cls.over_set | cls.under_set == coords
            assert not cls.mtdc_set & cls.over_set
            assert not cls.mtdc_set & cls.under_set
            assert not cls.over_set & cls.under_set

    def test_fallback_set_is_antichain(self):
        for m in builtin_study2():
            cls = classify_truth(m, EI)
            if cls.category == "all_safe" or not any(
                EI.lower <= m.prob(c) <= EI.upper for c in m.grid.coords()
            ):
                mt = sorted(cls.mtdc_set)
                for a in mt:
                    for b in mt:
                        if a != b:
                            assert not (a[0] <= b[0] and a[1] <= b[1])

    def test_uniform_safe_matrix(self):
        m = ScenarioMatrix("flat", tuple((0.05,) * 3 for _ in range(3)))
        cls = classify_truth(m, EI)
        assert cls.category == "all_safe"
        assert cls.mtdc_set == {(3, 3)}
        assert cls.over_set == frozenset()


class TestIo:
    def test_csv_roundtrip(self):
        m = builtin_study1()[0]
        back = matrix_from_csv(matrix_to_csv(m), label=m.label)
        assert back.probs == m.probs

    def test_json_roundtrip(self):
        m = builtin_study1()[4]
        back = scenario_from_json(scenario_to_json(m, EI))
        assert back.probs == m.probs
        assert back.reference_mtdcs == m.reference_mtdcs

    def test_json_carries_classification(self):
        import json

        doc = json.loads(scenario_to_json(builtin_study1()[1], EI))
        assert doc["classification"]["mtdc_set"] == [[4, 4]]
        assert doc["classification"]["bucket"] == "all_safe"
