"""Intensity-model semantics: indicators, exposures, validation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recapture import (
    BehaviorSpec,
    CaptureHistory,
    LinearBaseline,
    ModelSpec,
    StepBaseline,
    behavior_active,
    behavior_capture_count,
    capture_probability,
    effective_cum_hazard,
    hazard_ratio,
    identifiability_diagnostic,
    validate_identifiability,
)
from recapture.errors import DataError, DomainError, IdentifiabilityError

CLASSIC = ModelSpec(tau=1.0, behavior=BehaviorSpec())


def hist(times, z=(), sid="s"):
    return CaptureHistory(sid, tuple(times), tuple(z))


def spec_with(onset=1, expiry=None, window=None, tau=1.0):
    return ModelSpec(tau=tau, behavior=BehaviorSpec(onset, expiry, window))


@st.composite
def history_strategy(draw):
    k = draw(st.integers(min_value=1, max_value=6))
    times = sorted(
        draw(
            st.lists(
                st.floats(0.01, 0.99, allow_nan=False),
                min_size=k,
                max_size=k,
                unique=True,
            )
        )
    )
    return hist(times)


class TestBehaviorActive:
    def test_before_first_capture_inactive(self):
        h = hist([0.4, 0.6])
        assert not behavior_active(h, 0.2, CLASSIC)

    def test_after_first_capture_active(self):
        h = hist([0.4, 0.6])
        assert behavior_active(h, 0.5, CLASSIC)

    def test_memory_window_expires(self):
        h = hist([0.2, 0.5])
        spec = spec_with(onset=2, window=0.3)
        assert not behavior_active(h, 0.9, spec)  # 0.9 > 0.5 + 0.3
        assert behavior_active(h, 0.7, spec)

    def test_own_capture_instant_not_active(self):
        # Left-continuous counting: the onset capture itself is at the
        # unmodified rate.
        h = hist([0.4])
        assert not behavior_active(h, 0.4, CLASSIC)

    def test_expiry_count(self):
        h = hist([0.1, 0.3, 0.5, 0.7])
        spec = spec_with(onset=1, expiry=2)
        # Window is (t_1, t_3]: the capture observed with 2 prior captures
        # still occurs in the modified state, later ones do not.
        assert behavior_active(h, 0.5, spec)
        assert not behavior_active(h, 0.65, spec)

    def test_no_behavior_spec(self):
        spec = ModelSpec(tau=1.0, behavior=None)
        assert not behavior_active(hist([0.4]), 0.9, spec)


class TestBehaviorCaptureCount:
    def test_classic_three_captures(self):
        assert behavior_capture_count(hist([0.2, 0.5, 0.9]), CLASSIC) == 2

    def test_delayed_onset(self):
        spec = spec_with(onset=2)
        assert behavior_capture_count(hist([0.2, 0.5, 0.9]), spec) == 1

    def test_single_capture(self):
        for onset in (1, 2, 3):
            assert behavior_capture_count(hist([0.4]), spec_with(onset=onset)) == 0

    @given(history_strategy())
    @settings(max_examples=200, deadline=None)
    def test_classic_equals_captures_minus_one(self, h):
        assert behavior_capture_count(h, CLASSIC) == h.n_captures - 1

    @given(history_strategy())
    @settings(max_examples=100, deadline=None)
    def test_count_matches_pointwise_indicator(self, h):
        spec = spec_with(onset=2, expiry=3, window=0.4)
        want = sum(1 for t in h.times if behavior_active(h, t, spec))
        assert behavior_capture_count(h, spec) == want


class TestHazardRatio:
    def test_null_coefficients(self):
        assert hazard_ratio((1.3, -0.2), (0.0, 0.0)) == 1.0

    def test_fitted_style_value(self):
        assert hazard_ratio((1.0, 0.0), (-0.65, 0.1)) == pytest.approx(
            math.exp(-0.65), rel=1e-12
        )

    def test_unit_exponent(self):
        assert hazard_ratio((2.0,), (0.5,)) == pytest.approx(math.e, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            hazard_ratio((1.0, 2.0), (0.5,))


class TestCaptureProbability:
    def test_no_exposure(self):
        assert capture_probability(1.0, 1.0, 0.0) == 0.0

    def test_log_two_exposure(self):
        assert capture_probability(1.0, 1.0, math.log(2.0)) == pytest.approx(0.5)

    def test_rate_product_invariance(self):
        assert capture_probability(2.0, 0.5, math.log(2.0)) == pytest.approx(0.5)

    def test_strictly_increasing(self):
        base = capture_probability(1.0, 1.0, 0.7)
        for bump in [(1.3, 1.0, 0.7), (1.0, 1.3, 0.7), (1.0, 1.0, 0.9)]:
            assert capture_probability(*bump) > base

    def test_negative_input(self):
        with pytest.raises(DomainError):
            capture_probability(-1.0, 1.0, 1.0)


class TestEffectiveCumHazard:
    def test_unit_factor_is_total(self):
        base = LinearBaseline(1.0, 1.0)
        h = hist([0.3, 0.8])
        for spec in (CLASSIC, spec_with(onset=2, expiry=3, window=0.2)):
            assert effective_cum_hazard(h, base, 1.0, spec) == pytest.approx(1.0)

    def test_classic_linear_baseline(self):
        base = LinearBaseline(1.0, 1.0)
        val = effective_cum_hazard(hist([0.4]), base, 0.5, CLASSIC)
        assert val == pytest.approx(0.7)  # 0.5*1 + 0.5*0.4

    def test_delayed_onset_linear_baseline(self):
        base = LinearBaseline(1.0, 1.0)
        spec = spec_with(onset=2)
        val = effective_cum_hazard(hist([0.2, 0.5]), base, 0.5, spec)
        assert val == pytest.approx(1.0 + 0.5 * (0.5 - 1.0))

    def test_general_with_classic_settings_matches_classic(self):
        rng = np.random.default_rng(0)
        general = spec_with(onset=1, expiry=None, window=None)
        for _ in range(50):
            k = rng.integers(1, 5)
            h = hist(np.sort(rng.uniform(0.05, 0.95, k)))
            times = np.sort(rng.uniform(0, 1, 4))
            base = StepBaseline(times, rng.uniform(0.1, 1.0, 4))
            f = rng.uniform(0.2, 1.8)
            classic_val = f * base.total + (1 - f) * base.cum(h.times[0])
            assert effective_cum_hazard(h, base, f, general) == pytest.approx(
                classic_val, rel=1e-12
            )
            assert effective_cum_hazard(h, base, f, CLASSIC) == pytest.approx(
                classic_val, rel=1e-12
            )

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(80):
            k = rng.integers(1, 5)
            h = hist(np.sort(rng.uniform(0.05, 0.95, k)))
            base = StepBaseline(np.sort(rng.uniform(0, 1, 5)), rng.uniform(0.05, 0.8, 5))
            f = rng.uniform(0.1, 2.0)
            spec = spec_with(
                onset=int(rng.integers(1, 3)),
                expiry=None if rng.random() < 0.5 else int(rng.integers(3, 5)),
                window=None if rng.random() < 0.5 else float(rng.uniform(0.2, 0.8)),
            )
            val = effective_cum_hazard(h, base, f, spec)
            lo = min(f, 1.0) * base.total
            hi = max(f, 1.0) * base.total
            assert lo - 1e-12 <= val <= hi + 1e-12


class TestIdentifiability:
    def test_classic_recapture_suffices(self):
        hs = [hist([0.2], sid="a"), hist([0.3, 0.6], sid="b")]
        assert identifiability_diagnostic(hs, CLASSIC) is None

    def test_all_singletons_fail(self):
        hs = [hist([0.2], sid="a"), hist([0.5], sid="b")]
        diag = identifiability_diagnostic(hs, CLASSIC)
        assert diag is not None and "unidentified" in diag
        with pytest.raises(IdentifiabilityError):
            validate_identifiability(hs, CLASSIC)

    def test_memory_window_excludes_late_capture(self):
        hs = [hist([0.2, 0.5, 0.9], sid="a")]
        spec = spec_with(onset=2, window=0.1)
        assert identifiability_diagnostic(hs, spec) is not None
        wide = spec_with(onset=2, window=0.5)
        assert identifiability_diagnostic(hs, wide) is None

    def test_empty_dataset(self):
        with pytest.raises(DataError):
            identifiability_diagnostic([], CLASSIC)


class TestDataValidation:
    def test_requires_a_capture(self):
        with pytest.raises(DataError):
            hist([])

    def test_rejects_duplicate_times(self):
        with pytest.raises(DataError):
            hist([0.4, 0.4])

    def test_rejects_nonpositive_times(self):
        with pytest.raises(DataError):
            hist([0.0, 0.4])

    def test_behavior_spec_invariants(self):
        with pytest.raises(DataError):
            BehaviorSpec(onset=0)
        with pytest.raises(DataError):
            BehaviorSpec(onset=2, expiry_count=2)
        with pytest.raises(DataError):
            BehaviorSpec(memory_window=0.0)

    def test_step_baseline_validation(self):
        with pytest.raises(DataError):
            StepBaseline(np.array([0.3, 0.2]), np.array([0.1, 0.1]))
        with pytest.raises(DataError):
            StepBaseline(np.array([0.2, 0.3]), np.array([0.1, -0.1]))

    def test_step_baseline_clamps(self):
        base = StepBaseline(np.array([0.2, 0.6]), np.array([0.5, 0.25]))
        assert base.cum(0.1) == 0.0
        assert base.cum(0.2) == pytest.approx(0.5)  # right-continuous at jumps
        assert base.cum(5.0) == pytest.approx(0.75)
        assert base.total == pytest.approx(0.75)
