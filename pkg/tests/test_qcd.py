"""Quickest-change detection machinery: pmfs, posterior recursion, stopping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ackwatch.errors import ConfigurationError, EvaluationError, InvalidObservationError
from ackwatch.qcd import (
    AgeObservation,
    DetectorState,
    GeometricModel,
    RiskParams,
    age_from_packet,
    bayes_risk,
    first_crossing,
    geometric_pmf,
    moving_average_detector,
    no_change_posterior_path,
    posterior_update,
    stopping_decision,
)
from conftest import exhaustive_no_change_posterior

PAPER_MODEL = GeometricModel(rho1=0.63, rho2=0.567, rho_i=5e-6)


class TestGeometricPmf:
    def test_first_mass_is_parameter(self):
        assert geometric_pmf(0.63, 1) == pytest.approx(0.63)

    def test_support_starts_at_one(self):
        assert geometric_pmf(0.5, 0) == 0.0
        assert geometric_pmf(0.5, -3) == 0.0

    def test_second_mass(self):
        assert geometric_pmf(0.63, 2) == pytest.approx(0.63 * 0.37, abs=1e-15)

    def test_parameter_range(self):
        with pytest.raises(ConfigurationError):
            geometric_pmf(1.0, 1)

    def test_normalization(self):
        total = sum(geometric_pmf(0.3, k) for k in range(1, 200))
        assert total == pytest.approx(1.0, abs=1e-15)


class TestGeometricModel:
    def test_channel_construction(self):
        model = GeometricModel.from_channels(0.7, 0.9, 0.8, 5e-6)
        assert model.rho1 == pytest.approx(0.63)
        assert model.rho2 == pytest.approx(0.504)

    def test_misspecified_construction(self):
        model = GeometricModel.with_assumed_eavesdropper(0.7, 0.9, 0.98, 5e-6)
        assert model.rho2 == pytest.approx(0.6174)

    def test_blocking_cannot_speed_acks(self):
        with pytest.raises(ConfigurationError):
            GeometricModel(rho1=0.5, rho2=0.6, rho_i=1e-3)

    def test_means(self):
        assert PAPER_MODEL.mean_age_pre == pytest.approx(1.5873, abs=5e-5)
        assert PAPER_MODEL.mean_age_post == pytest.approx(1.7637, abs=5e-5)


class TestAgeObservation:
    def test_from_packet(self):
        obs = age_from_packet(10, 7, receipt_index=3)
        assert obs.age == 3 and obs.receipt_time == 10

    def test_minimal_age(self):
        assert age_from_packet(8, 7).age == 1

    def test_nonpositive_age_rejected(self):
        with pytest.raises(InvalidObservationError):
            age_from_packet(7, 7)
        with pytest.raises(InvalidObservationError):
            AgeObservation(receipt_index=1, receipt_time=5, age=0)


class TestPosteriorUpdate:
    def test_indistinguishable_models_keep_certainty(self):
        # b1 == b2 and a vanishing onset prior freeze the posterior at 1.
        model = GeometricModel(rho1=0.63, rho2=0.63, rho_i=1e-12)
        state = DetectorState.initial(threshold=0.5)
        for index, age in enumerate((1, 3, 2, 6, 1), start=1):
            state = posterior_update(state, AgeObservation(index, index * 2, age), model)
        assert state.z_hat == pytest.approx(1.0, abs=1e-9)

    def test_single_step_value(self):
        # rho1=0.63, rho2=0.567, rho_i=5e-6, A1=1: normalizer
        # 0.567 + 0.999995*0.063 = 0.629999685, posterior 0.9999955
        # (value frozen from the exhaustive-hypothesis oracle).
        state = DetectorState.initial(threshold=0.9875)
        state = posterior_update(state, AgeObservation(1, 1, 1), PAPER_MODEL)
        oracle = exhaustive_no_change_posterior([1], 0.63, 0.567, 5e-6)
        assert oracle == pytest.approx(0.99999550, abs=1e-8)
        assert state.z_hat == pytest.approx(oracle, abs=1e-12)

    def test_recursion_matches_exhaustive_oracle(self, rng):
        # Random length-20 sequences against the brute-force posterior.
        for _ in range(50):
            length = int(rng.integers(1, 21))
            ages = rng.integers(1, 7, size=length).tolist()
            rho1 = float(rng.uniform(0.1, 0.9))
            rho2 = float(rng.uniform(0.05, rho1))
            rho_i = float(rng.uniform(1e-6, 0.2))
            z, _ = no_change_posterior_path(ages, GeometricModel(rho1, rho2, rho_i))
            for m in range(1, length + 1):
                expected = exhaustive_no_change_posterior(ages[:m], rho1, rho2, rho_i)
                assert abs(z[m - 1] - expected) < 1e-10

    @given(
        ages=st.lists(st.integers(min_value=1, max_value=12), min_size=1, max_size=15),
        rho1=st.floats(min_value=0.05, max_value=0.95),
        frac=st.floats(min_value=0.1, max_value=1.0),
        rho_i=st.floats(min_value=1e-9, max_value=0.5),
    )
    @settings(max_examples=200, deadline=None)
    def test_posterior_bounded_property(self, ages, rho1, frac, rho_i):
        model = GeometricModel(rho1=rho1, rho2=rho1 * frac, rho_i=rho_i)
        z, log_z = no_change_posterior_path(ages, model)
        assert np.all(z >= 0.0) and np.all(z <= 1.0)
        assert not np.any(np.isnan(z)) and not np.any(np.isnan(log_z))

    def test_monotone_evidence_on_large_age(self):
        # For ages where b2 > b1 the posterior strictly decreases.
        model = GeometricModel(rho1=0.63, rho2=0.504, rho_i=1e-5)
        crossover_age = 5
        assert model.b2(crossover_age) > model.b1(crossover_age)
        state = DetectorState.initial(threshold=0.01)
        previous = state.z_hat
        state = posterior_update(state, AgeObservation(1, 2, crossover_age), model)
        assert state.z_hat < previous

    def test_huge_ages_underflow_both_pmfs(self):
        # Total blocking can push ages past the point where both geometric
        # pmfs underflow; the posterior must absorb at zero with a finite
        # log, never NaN.
        model = GeometricModel(rho1=0.63, rho2=0.504, rho_i=5e-6)
        ages = [1, 2, 1] + list(range(100, 2600, 250))
        z, log_z = no_change_posterior_path(ages, model)
        assert z[-1] == 0.0
        assert np.all(np.isfinite(log_z))
        assert np.all(np.diff(log_z[3:]) < 0)

    def test_out_of_support_age_rejected(self):
        model = GeometricModel(rho1=0.63, rho2=0.504, rho_i=5e-6)
        with pytest.raises(InvalidObservationError):
            no_change_posterior_path([1, 0], model)

    def test_underflow_is_absorbing_not_nan(self):
        # Relentless huge ages drive the posterior into the underflow
        # floor; the linear value pins at 0 while the log keeps moving.
        model = GeometricModel(rho1=0.9, rho2=0.05, rho_i=0.2)
        state = DetectorState.initial(threshold=1e-6)
        for index in range(1, 3000):
            state = posterior_update(state, AgeObservation(index, index, 50), model)
        assert state.z_hat == 0.0
        assert math.isfinite(state.log_z_hat) and state.log_z_hat < -700


class TestStoppingDecision:
    def test_above_threshold_continues(self):
        state = DetectorState(z_hat=0.99, log_z_hat=math.log(0.99), threshold=0.9875)
        assert not stopping_decision(state)

    def test_below_threshold_alarms(self):
        state = DetectorState(z_hat=0.98, log_z_hat=math.log(0.98), threshold=0.9875)
        assert stopping_decision(state)

    def test_boundary_is_inclusive(self):
        state = DetectorState(z_hat=0.9875, log_z_hat=math.log(0.9875), threshold=0.9875)
        assert stopping_decision(state)

    def test_alarm_latches_with_receipt_and_time(self):
        model = GeometricModel(rho1=0.63, rho2=0.3, rho_i=0.01)
        state = DetectorState.initial(threshold=0.5)
        for index, age in enumerate((9, 9, 9, 1, 1), start=1):
            state = posterior_update(state, AgeObservation(index, 10 * index, age), model)
        assert state.alarmed
        first = (state.alarm_receipt, state.alarm_time)
        assert state.alarm_receipt is not None and state.alarm_receipt <= 3
        # Later low-age evidence cannot reset the latch.
        assert (state.alarm_receipt, state.alarm_time) == first

    def test_alarm_index_nonincreasing_in_threshold(self, rng):
        ages = rng.integers(1, 8, size=300).tolist()
        model = GeometricModel(rho1=0.63, rho2=0.504, rho_i=1e-4)
        z, _ = no_change_posterior_path(ages, model)
        thresholds = np.linspace(0.05, 0.95, 19)
        taus = [first_crossing(z, h) or len(ages) + 1 for h in thresholds]
        assert all(b <= a for a, b in zip(taus, taus[1:]))


class TestMovingAverage:
    def test_constant_ages(self):
        assert np.all(moving_average_detector([1] * 40, 10) == 1.0)

    def test_window_alignment(self):
        values = moving_average_detector([1, 2, 3, 4], 2)
        assert values.tolist() == [1.5, 2.5, 3.5]

    def test_short_input_empty(self):
        assert moving_average_detector([1, 2], 5).size == 0

    def test_window_validation(self):
        with pytest.raises(ConfigurationError):
            moving_average_detector([1, 2, 3], 0)

    def test_concentration_around_geometric_means(self, rng):
        # Window-150 means cluster at 1/rho for geometric ages.
        for rho, mean in ((0.63, 1.5873), (0.567, 1.7637)):
            ages = rng.geometric(rho, size=30_000)
            values = moving_average_detector(ages, 150)
            assert np.mean(values) == pytest.approx(mean, abs=0.02)
            window_sd = np.sqrt(1 - rho) / rho / np.sqrt(150)
            assert np.mean(np.abs(values - mean) < 3.5 * window_sd) > 0.97


class TestBayesRisk:
    def test_all_on_time(self):
        outcomes = [(10, 10), (12, 12), (30, 30)]
        assert bayes_risk(outcomes, RiskParams(c=0.001)) == 0.0

    def test_pure_false_alarm(self):
        outcomes = [(5, 10), (1, 10)]
        assert bayes_risk(outcomes, RiskParams(c=0.001)) == 1.0

    def test_mixed_synthetic_set(self):
        # Mean positive delay 40 with false-alarm fraction 0.4 at c=0.001
        # gives 0.001 * 40 + 0.4 = 0.44.
        lam = 100
        outcomes = [(50, lam)] * 4 + [
            (lam + 100, lam),
            (lam + 100, lam),
            (lam + 100, lam),
            (lam + 50, lam),
            (lam + 25, lam),
            (lam + 25, lam),
        ]
        assert bayes_risk(outcomes, RiskParams(c=0.001)) == pytest.approx(0.44, abs=1e-12)

    def test_empty_set_rejected(self):
        with pytest.raises(EvaluationError):
            bayes_risk([], RiskParams(c=0.001))

    def test_penalty_validation(self):
        with pytest.raises(ConfigurationError):
            RiskParams(c=0.0)
