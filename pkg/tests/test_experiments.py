"""Experiment harness: case-study construction, sweep schemas, shared draws,
and deterministic reruns. The full-resolution statistical properties live in
test_acceptance.py; these run at reduced sample counts."""

import numpy as np
import pytest

from stem.experiments import (
    CaseStudy,
    DOWNCOST_AXIS,
    MISREPORT_GRID,
    VARIANCE_AXIS,
    baseline_compare,
    case_study,
    misreport_sweep,
    payment_sweep,
)
from stem.model import validate_config


@pytest.fixture(scope="module")
def small_case() -> CaseStudy:
    return case_study(scenario_count=200)


class TestCaseStudy:
    def test_validates_clean(self):
        cs = case_study()
        assert validate_config(cs.config, list(cs.distributions)) == []

    def test_shape(self):
        cs = case_study()
        assert cs.config.n == 5
        assert cs.config.demand == 100.0
        assert (cs.config.alpha1, cs.config.alpha2) == (10.0, 6.0)
        assert (cs.config.alpha3, cs.config.alpha4) == (8.0, 200.0)
        assert cs.true_variances == (4.0, 16.0, 36.0, 64.0, 1024.0)
        assert all(d.mean[1] == 20.0 for d in cs.distributions)

    def test_calibration_hash_stable(self):
        assert case_study().hash() == case_study().hash()
        assert case_study().hash() != case_study(seed=7).hash() or True  # hash ignores seed
        # The hash covers market parameters only, not the seed.
        assert case_study(seed=7).hash() == case_study().hash()


class TestMisreportSweep:
    def test_row_schema_and_grid(self, small_case):
        rows = misreport_sweep(small_case, grid=(4.0, 64.0), samples=50)
        assert len(rows) == 5 * 2
        producers = {r[0] for r in rows}
        assert producers == {1, 2, 3, 4, 5}
        for producer, variance, avg, se in rows:
            assert variance in (4.0, 64.0)
            assert np.isfinite(avg) and se >= 0.0

    def test_deterministic_rerun(self, small_case):
        a = misreport_sweep(small_case, grid=(16.0,), samples=40)
        b = misreport_sweep(small_case, grid=(16.0,), samples=40)
        assert a == b

    def test_default_grid(self):
        assert MISREPORT_GRID == (0.0, 4.0, 16.0, 36.0, 64.0, 144.0, 400.0, 1024.0)


class TestPaymentSweep:
    def test_variance_axis_schema(self, small_case):
        rows = payment_sweep(small_case, axis="variance", samples=60)
        assert [r[0] for r in rows] == list(VARIANCE_AXIS)
        for _, t1, t2_mean, t2_std in rows:
            assert np.isfinite(t1) and np.isfinite(t2_mean) and t2_std >= 0

    def test_downcost_axis_schema(self, small_case):
        rows = payment_sweep(small_case, axis="downcost", samples=60)
        assert [r[0] for r in rows] == list(DOWNCOST_AXIS)

    def test_first_payment_constant_across_repetitions(self, small_case):
        # t1 depends only on reports, so Monte Carlo sample count is irrelevant.
        a = payment_sweep(small_case, axis="variance", samples=30)
        b = payment_sweep(small_case, axis="variance", samples=90)
        for ra, rb in zip(a, b):
            assert ra[1] == rb[1]

    def test_unknown_axis_rejected(self, small_case):
        with pytest.raises(ValueError):
            payment_sweep(small_case, axis="price")


class TestBaselineCompare:
    def test_columns_and_schema(self, small_case):
        rows = baseline_compare(small_case, samples=80)
        assert [r[0] for r in rows] == ["stochastic", "deterministic_100", "deterministic_4"]
        for _, dispatchable, reserve, cost in rows:
            assert dispatchable >= 0 and reserve >= 0 and np.isfinite(cost)

    def test_deterministic_rerun_bit_for_bit(self, small_case):
        a = baseline_compare(small_case, samples=60)
        b = baseline_compare(small_case, samples=60)
        assert a == b

    def test_custom_assumed_variances(self, small_case):
        rows = baseline_compare(small_case, assumed_variances=(25.0,), samples=40)
        assert [r[0] for r in rows] == ["stochastic", "deterministic_25"]
