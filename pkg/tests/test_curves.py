"""Step-curve, average-hazard and product-limit tests.

Expected values are either hand calculations (step integrals, product-limit
formulas) or closed forms for exponential curves; the isotonic projection is
checked against a brute-force pooling oracle.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ahdml.curves import (
    AhSummary,
    StepSurvivalCurve,
    average_hazard,
    isotonic_project,
    km_estimate,
    log_ah_ratio,
    nelson_aalen,
    rmst,
)
from ahdml.errors import (
    DegenerateDataError,
    DegenerateEstimandError,
    DomainError,
    InvalidHorizonError,
)


def exp_curve(lam, tau, step=1e-3):
    return StepSurvivalCurve.from_function(lambda t: np.exp(-lam * t), tau, step)


class TestRmst:
    def test_flat_curve_returns_tau(self):
        curve = StepSurvivalCurve([12.0], [1.0])
        assert rmst(curve, 12.0) == 12.0

    def test_exponential_closed_form(self):
        # integral of exp(-0.1 t) over [0, 12] = (1 - e^-1.2) / 0.1
        curve = exp_curve(0.1, 12.0, step=1e-4)
        assert abs(rmst(curve, 12.0) - (1 - np.exp(-1.2)) / 0.1) < 1e-3

    def test_two_step_hand_integral(self):
        # S = 1 on [0,2), 0.5 on [2,12]:  2*1 + 10*0.5 = 7
        curve = StepSurvivalCurve([2.0], [0.5])
        assert rmst(curve, 12.0) == 7.0

    def test_invalid_horizon(self):
        with pytest.raises(InvalidHorizonError):
            rmst(StepSurvivalCurve([1.0], [0.5]), 0.0)

    def test_integral_stops_at_tau(self):
        curve = StepSurvivalCurve([1.0, 5.0], [0.5, 0.25])
        # [0,1): 1, [1,3): 0.5 -> 1 + 2*0.5
        assert rmst(curve, 3.0) == 2.0


class TestAverageHazard:
    def test_worked_example_quarter_rate(self):
        # F = 0.20, R = 0.8 at tau = 1 gives exactly 0.25 events per unit time
        s = AhSummary.from_incidence_and_persontime(0.20, 0.8, 1.0)
        assert s.ah == 0.25

    def test_worked_example_via_curve(self):
        curve = StepSurvivalCurve([0.0], [0.8])
        s = average_hazard(curve, 1.0)
        assert s.cuminc == pytest.approx(0.2, abs=1e-15)
        assert s.rmst == pytest.approx(0.8, abs=1e-15)
        assert s.ah == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("lam", [0.01, 0.05, 0.1, 0.5])
    @pytest.mark.parametrize("tau", [6.0, 12.0, 24.0])
    def test_exponential_identity(self, lam, tau):
        s = average_hazard(exp_curve(lam, tau), tau)
        assert abs(s.ah - lam) <= 1e-3

    def test_two_step_hand_value(self):
        curve = StepSurvivalCurve([2.0], [0.5])
        assert average_hazard(curve, 12.0).ah == pytest.approx(0.5 / 7.0, abs=1e-15)

    def test_product_identity_exact(self):
        curve = StepSurvivalCurve([1.0, 4.0, 7.5], [0.9, 0.6, 0.35])
        s = average_hazard(curve, 10.0)
        assert s.ah * s.rmst == pytest.approx(s.cuminc, abs=1e-15)

    def test_degenerate_no_events(self):
        with pytest.raises(DegenerateEstimandError):
            average_hazard(StepSurvivalCurve([12.0], [1.0]), 12.0)

    def test_summary_invariant_enforced(self):
        with pytest.raises(DomainError):
            AhSummary(cuminc=0.2, rmst=0.8, ah=0.3, tau=1.0)

    def test_stochastic_ordering(self):
        rng = np.random.default_rng(0)
        times = np.sort(rng.uniform(0.1, 11.9, 8))
        lower = np.sort(rng.uniform(0.05, 0.95, 8))[::-1]
        upper = np.clip(lower + rng.uniform(0.0, 0.05, 8), None, 1.0)
        upper = np.minimum.accumulate(upper)
        eta_hi = average_hazard(StepSurvivalCurve(times, upper), 12.0).ah
        eta_lo = average_hazard(StepSurvivalCurve(times, lower), 12.0).ah
        assert eta_hi <= eta_lo


class TestLogAhRatio:
    def test_identical_arms(self):
        assert log_ah_ratio(0.25, 0.25) == 0.0

    def test_exact_log(self):
        assert log_ah_ratio(0.25, 0.50) == pytest.approx(np.log(0.5), abs=1e-15)

    def test_composed_from_curves(self):
        eta1 = average_hazard(StepSurvivalCurve([2.0], [0.5]), 12.0).ah
        eta0 = average_hazard(exp_curve(0.07, 12.0), 12.0).ah
        got = log_ah_ratio(eta1, eta0)
        assert got == pytest.approx(np.log(eta1) - np.log(eta0), abs=1e-15)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            log_ah_ratio(0.0, 0.1)
        with pytest.raises(DomainError):
            log_ah_ratio(0.1, -0.2)


def brute_force_projection(x):
    """Exhaustive pooling oracle: best non-increasing blockwise-means vector."""
    x = np.asarray(x, float)
    n = len(x)
    best = None
    for mask in range(1 << (n - 1)):
        cuts = [0] + [i + 1 for i in range(n - 1) if (mask >> i) & 1] + [n]
        blocks = list(zip(cuts[:-1], cuts[1:]))
        means = [x[a:b].mean() for a, b in blocks]
        if any(means[i] < means[i + 1] - 1e-12 for i in range(len(means) - 1)):
            continue
        y = np.concatenate([np.full(b - a, m) for (a, b), m in zip(blocks, means)])
        d = float(np.sum((x - y) ** 2))
        if best is None or d < best[0] - 1e-15:
            best = (d, y)
    return best[1]


class TestIsotonicProjection:
    def test_already_monotone_unchanged(self):
        assert_allclose(isotonic_project([1.0, 0.9, 0.5]), [1.0, 0.9, 0.5])

    def test_single_violation_pooled(self):
        assert_allclose(isotonic_project([1.0, 0.8, 0.9, 0.7]), [1.0, 0.85, 0.85, 0.7])

    def test_constant_unchanged(self):
        assert_allclose(isotonic_project([0.5, 0.5, 0.5]), [0.5, 0.5, 0.5])

    def test_empty(self):
        assert isotonic_project([]).size == 0

    @given(st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=6))
    @settings(max_examples=150, deadline=None)
    def test_matches_brute_force_oracle(self, values):
        got = isotonic_project(values)
        want = brute_force_projection(values)
        assert_allclose(got, want, atol=1e-9)

    @given(st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=12))
    @settings(max_examples=150, deadline=None)
    def test_idempotent_and_mean_preserving(self, values):
        once = isotonic_project(values)
        assert_allclose(isotonic_project(once), once, atol=1e-12)
        assert np.mean(once) == pytest.approx(np.mean(values), abs=1e-9)
        assert np.all(np.diff(once) <= 1e-12)


class TestKaplanMeier:
    def test_all_events_no_ties(self):
        curve = km_estimate(np.array([1.0, 2.0, 3.0]), np.array([1, 1, 1]))
        assert_allclose(curve.times, [1, 2, 3])
        assert_allclose(curve.values, [2 / 3, 1 / 3, 0.0], atol=1e-15)

    def test_all_censored_is_flat_one(self):
        curve = km_estimate(np.array([1.0, 2.0]), np.array([0, 0]))
        assert curve(0.5) == 1.0 and curve(5.0) == 1.0

    def test_censoring_between_events(self):
        # hand product-limit: S(1)=2/3; at t=3 one at risk, one event -> 0
        curve = km_estimate(np.array([1.0, 2.0, 3.0]), np.array([1, 0, 1]))
        assert_allclose(curve.times, [1, 3])
        assert_allclose(curve.values, [2 / 3, 0.0], atol=1e-15)

    def test_tied_event_and_censoring_events_first(self):
        # censored unit at t=2 is still at risk for the event at t=2
        curve = km_estimate(np.array([2.0, 2.0, 3.0]), np.array([1, 0, 0]))
        assert_allclose(curve.values, [2 / 3], atol=1e-15)

    def test_unit_weights_match_unweighted(self):
        rng = np.random.default_rng(1)
        u = rng.exponential(5, 50)
        d = rng.integers(0, 2, 50)
        d[0] = 1
        a = km_estimate(u, d)
        b = km_estimate(u, d, weights=np.ones(50))
        assert_allclose(a.values, b.values, atol=1e-15)

    def test_degenerate_all_zero_followup(self):
        with pytest.raises(DegenerateDataError):
            km_estimate(np.array([0.0, 0.0]), np.array([0, 0]))


class TestNelsonAalen:
    def test_hand_increments(self):
        curve = nelson_aalen(np.array([1.0, 2.0]), np.array([1, 1]))
        assert_allclose(curve.values, [0.5, 1.5], atol=1e-15)

    def test_all_censored_flat_zero(self):
        curve = nelson_aalen(np.array([1.0, 2.0]), np.array([0, 0]))
        assert curve(10.0) == 0.0

    def test_single_event(self):
        curve = nelson_aalen(np.array([5.0]), np.array([1]))
        assert_allclose(curve.values, [1.0], atol=1e-15)


class TestStepEvaluation:
    def test_before_first_jump_is_one(self):
        curve = StepSurvivalCurve([3.0], [0.4])
        assert curve(2.999) == 1.0
        assert curve(3.0) == 0.4          # right continuity
        assert curve(3.0, side="left") == 1.0

    @given(st.floats(min_value=0, max_value=20))
    @settings(max_examples=100, deadline=None)
    def test_definition_of_step_evaluation(self, t):
        curve = StepSurvivalCurve([1.0, 5.0, 9.0], [0.7, 0.4, 0.1])
        # the value is that of the last jump at or before t, 1 before any jump
        later = [v for k, v in zip(curve.times, curve.values) if k <= t]
        assert curve(t) == (later[-1] if later else 1.0)
