"""Nuisance learner tests: propensity IRLS, Cox, parametric AFT, selection.

Likelihood-based checks use independently coded log-likelihoods inside the
tests (closed forms or numeric Hessians) rather than the fitter's internals.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ahdml.curves import nelson_aalen
from ahdml.data import Dataset
from ahdml.errors import UnfittableError
from ahdml.nuisance import (
    LearnerSpec,
    PropensityModel,
    cox_partial_loglik,
    fit_cox,
    fit_parametric_aft,
    fit_propensity,
    fit_stratified_km,
    select_learner,
    train_fingerprint,
    _outcome_view,
)
from ahdml.simulate import PhCoeffs, DgmSpec, sample_dataset


def expit(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, float)))


def make_data(w, a, u, delta):
    return Dataset(np.atleast_2d(np.asarray(w, float)).reshape(len(a), -1), a, u, delta)


class TestPropensity:
    def test_balanced_independent_gives_arm_fraction(self):
        rng = np.random.default_rng(0)
        n = 5000
        w = rng.normal(size=(n, 2))
        a = (rng.random(n) < 0.35).astype(int)
        model = fit_propensity(Dataset(w, a, np.ones(n), np.ones(n, dtype=int)))
        preds = model.predict(w, 1)
        assert abs(preds.mean() - a.mean()) < 0.01
        assert preds.std() < 0.05

    def test_slope_recovery(self):
        rng = np.random.default_rng(12)
        n = 5000
        w = rng.normal(size=(n, 1))
        a = (rng.random(n) < expit(w[:, 0])).astype(int)
        model = fit_propensity(Dataset(w, a, np.ones(n), np.ones(n, dtype=int)))
        assert abs(model.coef[1] - 1.0) < 0.1

    def test_truncation_rule(self):
        model = PropensityModel(basis="raw", coef=np.array([-10.0, 0.0]), epsilon=0.01)
        w = np.zeros((1, 1))
        assert model.predict(w, 1)[0] == 0.01
        assert model.predict(w, 1)[0] + model.predict(w, 0)[0] == 1.0

    def test_separation_falls_back_to_ridge(self):
        n = 60
        w = np.linspace(-1, 1, n)[:, None]
        a = (w[:, 0] > 0).astype(int)
        model = fit_propensity(Dataset(w, a, np.ones(n), np.ones(n, dtype=int)))
        assert model.stabilized

    def test_single_arm_unfittable(self):
        with pytest.raises(UnfittableError):
            fit_propensity(make_data(np.zeros(4), [1, 1, 1, 1], np.ones(4), np.ones(4, int)))


def numeric_se(negloglik, theta_hat, index, eps=1e-5):
    """Observed-information standard error via a numeric Hessian."""
    p = len(theta_hat)
    H = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            e_i = np.zeros(p); e_i[i] = eps
            e_j = np.zeros(p); e_j[j] = eps
            H[i, j] = (negloglik(theta_hat + e_i + e_j) - negloglik(theta_hat + e_i - e_j)
                       - negloglik(theta_hat - e_i + e_j) + negloglik(theta_hat - e_i - e_j)
                       ) / (4 * eps * eps)
    cov = np.linalg.inv(H)
    return float(np.sqrt(cov[index, index]))


class TestCox:
    def test_two_unit_partial_likelihood_closed_form(self):
        # event at u=1 with both units at risk: l(b) = b*x1 - log(e^{b x1} + e^{b x2})
        u = np.array([1.0, 2.0])
        delta = np.array([1, 0])
        x = np.array([[1.0], [0.0]])
        for beta in (-1.0, -0.3, 0.0, 0.7, 2.0):
            got = cox_partial_loglik(np.array([beta]), u, delta, x)
            want = beta - np.log(np.exp(beta) + 1.0)
            assert got == pytest.approx(want, abs=1e-12)

    def test_null_effect_within_three_se(self):
        rng = np.random.default_rng(2)
        n = 2000
        w = rng.normal(size=(n, 1))
        t = rng.exponential(10.0, n)
        c = rng.exponential(20.0, n)
        data = Dataset(w, rng.integers(0, 2, n), np.minimum(t, c), (t <= c).astype(int))
        model = fit_cox(data)

        def neg_pl(beta):
            X = np.column_stack([data.a, data.w])
            return -cox_partial_loglik(beta, data.u, data.delta, X)

        se_w = numeric_se(neg_pl, model.coef, index=1, eps=1e-4)
        assert abs(model.coef[1]) <= 3 * se_w

    def test_recovers_treatment_effect_without_interactions(self):
        # proportional-hazards mechanism with treatment interactions zeroed:
        # the Cox working model is then correctly specified up to the omitted
        # covariate product term, and the treatment coefficient targets -0.36
        spec = DgmSpec(kind="ph",
                       event=PhCoeffs(b_w1_a=0.0, b_w3_a=0.0, b_w2_a=0.0))
        data = sample_dataset(spec, 2000, np.random.default_rng(3))
        model = fit_cox(data)

        def neg_pl(beta):
            X = np.column_stack([data.a, data.w])
            return -cox_partial_loglik(beta, data.u, data.delta, X)

        se_a = numeric_se(neg_pl, model.coef, index=0, eps=1e-4)
        assert abs(model.coef[0] - (-0.36)) <= 3 * se_a

    def test_zero_beta_reproduces_nelson_aalen(self):
        rng = np.random.default_rng(4)
        n = 200
        data = Dataset(rng.normal(size=(n, 2)), rng.integers(0, 2, n),
                       rng.exponential(5, n), rng.integers(0, 2, n))
        model = fit_cox(data, max_iter=0)
        na = nelson_aalen(data.u, data.delta)
        assert_allclose(model.baseline_times, na.times)
        assert_allclose(model.baseline_cumhaz, na.values, atol=1e-12)

    def test_no_events_unfittable(self):
        with pytest.raises(UnfittableError):
            fit_cox(make_data(np.zeros(3), [0, 1, 0], [1.0, 2.0, 3.0], [0, 0, 0]))

    def test_monotone_prediction_and_one_at_origin(self):
        rng = np.random.default_rng(5)
        n = 300
        t = rng.exponential(8, n)
        data = Dataset(rng.normal(size=(n, 2)), rng.integers(0, 2, n),
                       np.minimum(t, 12.0), (t <= 12.0).astype(int))
        model = fit_cox(data, interactions=True)
        grid = np.linspace(0.0, 12.0, 40)
        s = model.survival(grid, 1, data.w[:20])
        assert_allclose(s[:, 0], 1.0)
        assert np.all(np.diff(s, axis=1) <= 1e-12)
        assert np.all(s >= model.floor - 1e-15)


class TestParametricAft:
    def test_exponential_matches_censored_mle_closed_form(self):
        rng = np.random.default_rng(6)
        n = 5000
        t = rng.exponential(10.0, n)
        c = rng.exponential(25.0, n)
        u, delta = np.minimum(t, c), (t <= c).astype(int)
        data = Dataset(np.zeros((n, 1)), rng.integers(0, 2, n), u, delta)
        # no-covariate closed form: rate = (number of events) / (total time)
        spec_rate = delta.sum() / u.sum()
        model = fit_parametric_aft(make_data(np.zeros(n), np.zeros(n, int), u, delta),
                                   "exponential")
        fitted_rate = np.exp(-model.coef[0])
        assert fitted_rate == pytest.approx(spec_rate, rel=1e-6)
        assert abs(fitted_rate - 0.1) <= 3 * 0.1 / np.sqrt(delta.sum())

    def test_weibull_shape_one_on_exponential_data(self):
        rng = np.random.default_rng(7)
        n = 5000
        t = rng.exponential(10.0, n)
        c = rng.exponential(25.0, n)
        u, delta = np.minimum(t, c), (t <= c).astype(int)
        a = rng.integers(0, 2, n)
        data = make_data(rng.normal(size=n), a, u, delta)
        model = fit_parametric_aft(data, "weibull")

        logu = np.log(u)
        X = np.column_stack([np.ones(n), a, data.w[:, 0]])

        def nll(theta):             # independent reimplementation of the likelihood
            beta, s = theta[:3], theta[3]
            z = (logu - X @ beta) / np.exp(s)
            ll = delta * (-s - logu + z) - np.exp(z)
            return -np.sum(ll)

        theta_hat = np.concatenate([model.coef, [model.log_scale]])
        se_logscale = numeric_se(nll, theta_hat, index=3, eps=1e-5)
        # shape k = exp(-log_scale); exponential data means log_scale ~ 0
        assert abs(model.log_scale) <= 3 * se_logscale

    def test_loglogistic_self_recovery(self):
        rng = np.random.default_rng(81)
        n = 5000
        beta0_true, k_true = 2.0, 2.5
        v = rng.uniform(size=n)
        t = np.exp(beta0_true) * (v / (1 - v)) ** (1 / k_true)
        c = rng.exponential(30.0, n)
        u, delta = np.minimum(t, c), (t <= c).astype(int)
        a = rng.integers(0, 2, n)
        data = make_data(rng.normal(size=n), a, u, delta)
        model = fit_parametric_aft(data, "loglogistic")

        logu = np.log(u)
        X = np.column_stack([np.ones(n), a, data.w[:, 0]])

        def nll(theta):
            beta, s = theta[:3], theta[3]
            z = (logu - X @ beta) / np.exp(s)
            ll = delta * (-s - logu + z) - (1 + delta) * np.logaddexp(0.0, z)
            return -np.sum(ll)

        theta_hat = np.concatenate([model.coef, [model.log_scale]])
        se0 = numeric_se(nll, theta_hat, index=0, eps=1e-5)
        se_s = numeric_se(nll, theta_hat, index=3, eps=1e-5)
        assert abs(model.coef[0] - beta0_true) <= 3 * se0
        assert abs(model.log_scale - np.log(1 / k_true)) <= 3 * se_s

    def test_predictions_start_at_one_and_decrease(self):
        rng = np.random.default_rng(9)
        n = 400
        data = make_data(rng.normal(size=n), rng.integers(0, 2, n),
                         rng.exponential(5, n), np.ones(n, int))
        for family in ("exponential", "weibull", "loglogistic"):
            model = fit_parametric_aft(data, family)
            grid = np.linspace(0.0, 15.0, 30)
            s = model.survival(grid, 0, data.w[:10])
            assert_allclose(s[:, 0], 1.0)
            assert np.all(np.diff(s, axis=1) <= 1e-12)


class TestOutcomeView:
    def test_censoring_flip_respects_horizon(self):
        data = make_data(np.zeros(3), [0, 1, 0], [5.0, 30.0, 8.0], [0, 0, 1])
        u, d = _outcome_view(data, "censoring", horizon=12.0)
        # the unit followed past the horizon is NOT a censoring event at 12
        assert_allclose(u, [5.0, 12.0, 8.0])
        assert_allclose(d, [1, 0, 0])

    def test_event_view_matches_plain_truncation(self):
        data = make_data(np.zeros(3), [0, 1, 0], [5.0, 30.0, 8.0], [1, 1, 0])
        u, d = _outcome_view(data, "event", horizon=12.0)
        assert_allclose(u, [5.0, 12.0, 8.0])
        assert_allclose(d, [1, 0, 0])


class TestSelectLearner:
    def test_singleton_registry(self):
        rng = np.random.default_rng(10)
        n = 300
        data = make_data(rng.normal(size=n), rng.integers(0, 2, n),
                         rng.exponential(5, n), np.ones(n, int))
        model = select_learner(data, [LearnerSpec("exponential-aft")])
        assert model.kind == "exponential-aft"

    def test_tie_break_first_listed(self):
        rng = np.random.default_rng(11)
        n = 300
        data = make_data(rng.normal(size=n), rng.integers(0, 2, n),
                         rng.exponential(5, n), np.ones(n, int))
        model = select_learner(data, [LearnerSpec("exponential-aft"),
                                      LearnerSpec("exponential-aft")], v_folds=2)
        assert model.kind == "exponential-aft"

    def test_model_selection_consistency(self):
        # exponential data: the exponential family wins the CV risk nearly always
        wins = 0
        reps = 200
        for r in range(reps):
            rng = np.random.default_rng(500 + r)
            n = 1000
            t = rng.exponential(10.0, n)
            c = rng.exponential(25.0, n)
            data = make_data(rng.normal(size=n), rng.integers(0, 2, n),
                             np.minimum(t, c), (t <= c).astype(int))
            model = select_learner(data, [LearnerSpec("exponential-aft"),
                                          LearnerSpec("loglogistic-aft")],
                                   v_folds=5, seed=r)
            wins += model.kind == "exponential-aft"
        assert wins >= 0.90 * reps

    def test_all_unfittable(self):
        data = make_data(np.zeros(4), [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0], [0, 0, 0, 0])
        with pytest.raises(UnfittableError):
            select_learner(data, [LearnerSpec("exponential-aft"),
                                  LearnerSpec("weibull-aft")], v_folds=2)


class TestStratifiedKm:
    def test_saturated_on_discrete_covariate(self):
        w = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0])
        a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        u = np.array([1.0, 2.0, 1.0, 3.0, 2.0, 2.0, 4.0, 5.0])
        d = np.ones(8, int)
        model = fit_stratified_km(Dataset(w[:, None], a, u, d))
        assert model.by_pattern
        # stratum (a=0, w=0) has events at 1 and 2 -> S(1.5) = 1/2
        assert model.survival_at(np.array([1.5]), 0, np.array([[0.0]]))[0] == pytest.approx(0.5)

    def test_unseen_stratum_falls_back_to_arm(self):
        w = np.array([[0.0], [0.0], [1.0], [1.0]])
        model = fit_stratified_km(Dataset(w, [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1]))
        v_arm = model.survival_at(np.array([2.5]), 0, np.array([[99.0]]))[0]
        km_arm = model.arm_curves[0](2.5)
        assert v_arm == pytest.approx(max(km_arm, model.floor))


def test_train_fingerprint_is_order_invariant():
    assert train_fingerprint([3, 1, 2]) == train_fingerprint([1, 2, 3])
    assert train_fingerprint([1, 2, 3]) != train_fingerprint([1, 2, 4])
