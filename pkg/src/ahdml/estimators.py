"""Estimation pipelines for the log average-hazard ratio.

``ah_dml`` is the cross-fitted one-step pipeline: nuisances trained per fold
on the complement, per-unit survival influence values averaged into an
efficient survival path, isotonic projection, plug-in mapping to average
hazards, and a Wald interval from the empirical variance of the mapped
influence values.  ``g_computation`` and ``cox_marginal`` are the
outcome-regression and Cox working-model comparators with nonparametric
bootstrap intervals.

Variance is computed from the unprojected influence values while the point
estimate uses the projected curves; projection is a boundary correction that
never changes an already-monotone path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .curves import (
    AhSummary,
    StepSurvivalCurve,
    average_hazard,
    isotonic_project,
    log_ah_ratio,
)
from .data import Dataset
from .errors import (
    DegenerateEstimandError,
    DomainError,
    FoldInfeasibleError,
    NonConvergenceError,
    PositivityError,
    UnfittableError,
)
from .influence import eif_aggregates, theta_eif_values
from .nuisance import (
    ConditionalSurvivalModel,
    LearnerConfig,
    fit_cox,
    fit_nuisance_triple,
    select_learner,
)

__all__ = [
    "CrossFitPlan",
    "AhEstimate",
    "ah_dml",
    "g_computation",
    "cox_marginal",
    "marginalized_conditional_rate",
    "marginalized_rate_from_model",
    "wald_interval",
    "plugin_marginal_curve",
]


@dataclass(frozen=True)
class CrossFitPlan:
    """Fold assignment, stratified by treatment arm for per-fold positivity."""

    k_folds: int = 5
    seed: int = 0

    def assign(self, data: Dataset, max_reseeds: int = 10) -> np.ndarray:
        """Fold ids per unit; every fold must hold both arms and >= 1 event
        per arm, else reseed (up to ``max_reseeds``) and finally error."""
        for attempt in range(max_reseeds + 1):
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, attempt)))
            folds = np.empty(data.n, dtype=int)
            for arm in (0, 1):
                idx = np.flatnonzero(data.a == arm)
                rng.shuffle(idx)
                folds[idx] = np.resize(np.arange(self.k_folds), idx.size)
            if self._feasible(data, folds):
                return folds
        raise FoldInfeasibleError(
            f"no feasible {self.k_folds}-fold split after {max_reseeds} reseeds")

    def _feasible(self, data: Dataset, folds: np.ndarray) -> bool:
        for k in range(self.k_folds):
            mask = folds == k
            for arm in (0, 1):
                sel = mask & (data.a == arm)
                if not sel.any() or data.delta[sel].sum() < 1:
                    return False
        return True


@dataclass(frozen=True)
class AhEstimate:
    """Point estimates, influence values and a Wald interval for one fit."""

    summary0: AhSummary
    summary1: AhSummary
    theta: float
    rah: float
    se: float | None
    ci_low: float | None
    ci_high: float | None
    alpha: float
    method: str
    n: int
    eif_values: np.ndarray | None = None
    warnings: tuple = ()

    def __post_init__(self):
        if abs(self.rah - float(np.exp(self.theta))) > 1e-12 * max(1.0, self.rah):
            raise DomainError("rah must equal exp(theta)")
        if self.se is not None:
            if self.se <= 0:
                raise DomainError("se must be positive")
            if not (self.ci_low <= self.theta <= self.ci_high):
                raise DomainError("interval must bracket theta")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n": self.n,
            "tau": self.summary0.tau,
            "alpha": self.alpha,
            "eta0": self.summary0.ah,
            "eta1": self.summary1.ah,
            "cuminc0": self.summary0.cuminc,
            "cuminc1": self.summary1.cuminc,
            "rmst0": self.summary0.rmst,
            "rmst1": self.summary1.rmst,
            "theta": self.theta,
            "rah": self.rah,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "warnings": list(self.warnings),
            "eif_values": None if self.eif_values is None else [float(x) for x in self.eif_values],
        }


def wald_interval(theta: float, se_of_mean: float, alpha: float = 0.05):
    """Symmetric normal-quantile interval theta +- z_{1-alpha/2} * se."""
    if not (0.0 < alpha <= 1.0) or not np.isfinite(alpha):
        raise DomainError(f"alpha must be in (0, 1], got {alpha}")
    if se_of_mean <= 0:
        raise DomainError("se must be positive")
    z = float(norm.ppf(1.0 - alpha / 2.0))
    return theta - z * se_of_mean, theta + z * se_of_mean


def _check_arms_events(data: Dataset, tau: float):
    if data.a.min() == data.a.max():
        raise PositivityError("both treatment arms are required")
    for arm in (0, 1):
        sel = data.a == arm
        if not np.any((data.u[sel] <= tau) & (data.delta[sel] == 1)):
            raise DegenerateEstimandError(f"arm {arm} has no events by tau={tau}")


def _extrapolation_warning(data: Dataset, tau: float) -> tuple:
    last_event = data.u[data.delta == 1].max() if np.any(data.delta == 1) else 0.0
    if tau > last_event:
        return (f"tau={tau} exceeds the last observed event time {last_event:g}; "
                "the survival path is extrapolated as constant beyond support",)
    return ()


def _project_curve(knots: np.ndarray, path: np.ndarray) -> StepSurvivalCurve:
    projected = np.clip(isotonic_project(path, "non-increasing"), 0.0, 1.0)
    return StepSurvivalCurve(knots, projected)


def ah_dml(data: Dataset, tau: float, plan: CrossFitPlan | None = None,
           config: LearnerConfig | None = None, alpha: float = 0.05) -> AhEstimate:
    """Cross-fitted doubly robust one-step estimator of the log AH ratio.

    With ``config.fixed_nuisances`` set the fitting stage is bypassed and the
    same triple is used for every unit, which reproduces the sample-split-free
    one-step exactly.
    """
    if tau <= 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    config = config or LearnerConfig()
    plan = plan or CrossFitPlan()
    _check_arms_events(data, tau)
    grid = np.concatenate([data.event_times(tau), [tau]])

    if config.fixed_nuisances is not None:
        fold_triples = [(np.arange(data.n), config.fixed_nuisances)]
    else:
        folds = plan.assign(data)
        fold_triples = []
        for k in range(plan.k_folds):
            test_idx = np.flatnonzero(folds == k)
            train_idx = np.flatnonzero(folds != k)
            # nuisances are only consumed on [0, tau]: fitting on
            # horizon-truncated outcomes keeps the administrative-censoring
            # mass at the study cap out of the parametric likelihoods
            triple = fit_nuisance_triple(data.subset(train_idx), config, fold_id=k,
                                         indices=train_idx, seed=plan.seed * 1000 + k,
                                         horizon=tau)
            fold_triples.append((test_idx, triple))

    # one evaluation knot set shared by all folds
    shared = [grid]
    for _, triple in fold_triples:
        basis = np.asarray(triple.event.hazard_basis(tau), float)
        shared.append(basis[basis > 0])
    shared_grid = np.unique(np.concatenate(shared))

    estimates, eif_parts = {}, {}
    for arm in (0, 1):
        phi_tau = np.empty(data.n)
        int_phi = np.empty(data.n)
        path_sum = None
        knots = None
        for test_idx, triple in fold_triples:
            agg = eif_aggregates(data.subset(test_idx), arm, triple, shared_grid, tau)
            if path_sum is None:
                knots = agg.knots
                path_sum = np.zeros_like(agg.mean_phi)
            path_sum += agg.mean_phi * len(test_idx)
            phi_tau[test_idx] = agg.phi_tau
            int_phi[test_idx] = agg.int_phi
        raw_path = path_sum / data.n
        curve = _project_curve(knots, raw_path)
        summary = average_hazard(curve, tau)
        estimates[arm] = summary
        eif_parts[arm] = theta_eif_values(phi_tau, int_phi, summary.cuminc, summary.rmst)

    theta = log_ah_ratio(estimates[1].ah, estimates[0].ah)
    eif = eif_parts[1] - eif_parts[0]
    sigma = float(np.sqrt(np.mean((eif - eif.mean()) ** 2)))
    se = sigma / np.sqrt(data.n)
    lo, hi = wald_interval(theta, se, alpha)
    return AhEstimate(summary0=estimates[0], summary1=estimates[1], theta=float(theta),
                      rah=float(np.exp(theta)), se=se, ci_low=lo, ci_high=hi,
                      alpha=alpha, method="ah-dml", n=data.n, eif_values=eif,
                      warnings=_extrapolation_warning(data, tau))


# ---------------------------------------------------------------------------
# comparators

def plugin_marginal_curve(model: ConditionalSurvivalModel, data: Dataset, arm: int,
                          grid: np.ndarray, block: int = 2048) -> np.ndarray:
    """Average of conditional survival over the empirical covariate law."""
    total = np.zeros(len(grid))
    for lo in range(0, data.n, block):
        total += model.survival(grid, arm, data.w[lo:lo + block]).sum(axis=0)
    return total / data.n


def _point_theta_from_model(model, data: Dataset, tau: float):
    grid = np.concatenate([data.event_times(tau), [tau]])
    summaries = {}
    for arm in (0, 1):
        vals = np.clip(plugin_marginal_curve(model, data, arm, grid), 0.0, 1.0)
        summaries[arm] = average_hazard(StepSurvivalCurve(grid, vals), tau)
    theta = log_ah_ratio(summaries[1].ah, summaries[0].ah)
    return summaries, theta


def _bootstrap_ci(fit_fn, data: Dataset, reps: int, alpha: float, seed: int):
    """Percentile bootstrap over unit resampling; single-arm or degenerate
    resamples are redrawn (at most 20 retries each)."""
    thetas = np.empty(reps)
    for b in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        for _ in range(20):
            idx = rng.integers(0, data.n, size=data.n)
            boot = data.subset(idx)
            if boot.a.min() == boot.a.max():
                continue
            try:
                thetas[b] = fit_fn(boot)
                break
            except (DegenerateEstimandError, UnfittableError, NonConvergenceError):
                continue
        else:
            raise PositivityError("bootstrap resampling failed 20 times in a row")
    lo, hi = np.quantile(thetas, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(np.std(thetas, ddof=1)), float(lo), float(hi)


def g_computation(data: Dataset, tau: float, config: LearnerConfig | None = None,
                  bootstrap_reps: int = 200, alpha: float = 0.05, seed: int = 0,
                  model: ConditionalSurvivalModel | None = None) -> AhEstimate:
    """Outcome-regression plug-in without augmentation; percentile bootstrap.

    ``bootstrap_reps=0`` gives the point estimate only, with the missing
    uncertainty flagged.  A prefit ``model`` skips learner selection (used by
    tests with saturated or oracle models; the bootstrap then refits nothing
    and is only valid for fixed models).
    """
    config = config or LearnerConfig()
    _check_arms_events(data, tau)

    def fit_model(d: Dataset):
        if model is not None:
            return model
        return select_learner(d, config.event_candidates, config.v_folds,
                              "event", config.floor_s, seed=seed, horizon=tau)

    def point(d: Dataset) -> float:
        return _point_theta_from_model(fit_model(d), d, tau)[1]

    summaries, theta = _point_theta_from_model(fit_model(data), data, tau)
    warnings = _extrapolation_warning(data, tau)
    if bootstrap_reps == 0:
        return AhEstimate(summary0=summaries[0], summary1=summaries[1], theta=float(theta),
                          rah=float(np.exp(theta)), se=None, ci_low=None, ci_high=None,
                          alpha=alpha, method="g-comp", n=data.n,
                          warnings=warnings + ("no bootstrap replicates: se unavailable",))
    se, lo, hi = _bootstrap_ci(point, data, bootstrap_reps, alpha, seed)
    lo, hi = min(lo, theta), max(hi, theta)
    return AhEstimate(summary0=summaries[0], summary1=summaries[1], theta=float(theta),
                      rah=float(np.exp(theta)), se=se, ci_low=lo, ci_high=hi,
                      alpha=alpha, method="g-comp", n=data.n, warnings=warnings)


def cox_marginal(data: Dataset, tau: float, bootstrap_reps: int = 200,
                 alpha: float = 0.05, seed: int = 0,
                 force_zero_coefficients: bool = False) -> AhEstimate:
    """One Cox working model; per-unit predictions under both arms are
    averaged into marginal curves and mapped to average hazards."""
    _check_arms_events(data, tau)

    def fit_model(d: Dataset):
        if force_zero_coefficients:
            return fit_cox(d, "event", interactions=False, max_iter=0)
        return fit_cox(d, "event", interactions=False)

    def point(d: Dataset) -> float:
        return _point_theta_from_model(fit_model(d), d, tau)[1]

    summaries, theta = _point_theta_from_model(fit_model(data), data, tau)
    warnings = _extrapolation_warning(data, tau)
    if bootstrap_reps == 0:
        return AhEstimate(summary0=summaries[0], summary1=summaries[1], theta=float(theta),
                          rah=float(np.exp(theta)), se=None, ci_low=None, ci_high=None,
                          alpha=alpha, method="cox-marginal", n=data.n,
                          warnings=warnings + ("no bootstrap replicates: se unavailable",))
    se, lo, hi = _bootstrap_ci(point, data, bootstrap_reps, alpha, seed)
    lo, hi = min(lo, theta), max(hi, theta)
    return AhEstimate(summary0=summaries[0], summary1=summaries[1], theta=float(theta),
                      rah=float(np.exp(theta)), se=se, ci_low=lo, ci_high=hi,
                      alpha=alpha, method="cox-marginal", n=data.n, warnings=warnings)


# ---------------------------------------------------------------------------
# non-collapsibility diagnostic

def marginalized_rate_from_model(model: ConditionalSurvivalModel, W: np.ndarray,
                                 arm: int, tau: float) -> tuple[float, int]:
    """Mean of stratum-specific rates F(tau|a,w)/R(tau|a,w) over units.

    Returns the mean and the number of units skipped for zero person-time.
    """
    W = np.atleast_2d(np.asarray(W, float))
    basis = np.asarray(model.hazard_basis(tau), float)
    knots = np.unique(np.concatenate([basis[(basis > 0) & (basis < tau)], [tau]]))
    S = model.survival(knots, arm, W)
    widths = np.concatenate([np.diff(knots), [0.0]])
    r = knots[0] + S @ widths
    f = 1.0 - S[:, -1]
    keep = r > 0
    skipped = int(np.sum(~keep))
    if not keep.any():
        raise DegenerateEstimandError("every stratum has zero person-time")
    return float(np.mean(f[keep] / r[keep])), skipped


def marginalized_conditional_rate(data: Dataset, tau: float,
                                  config: LearnerConfig | None = None,
                                  model: ConditionalSurvivalModel | None = None) -> dict:
    """Average stratum-specific incidence rate per arm (diagnostic).

    Reported alongside the average hazard to demonstrate non-collapsibility:
    the mean of ratios is not the ratio of means.
    """
    config = config or LearnerConfig()
    if model is None:
        model = select_learner(data, config.event_candidates, config.v_folds, "event",
                               config.floor_s)
    out = {}
    for arm in (0, 1):
        rate, skipped = marginalized_rate_from_model(model, data.w, arm, tau)
        out[arm] = {"rate": rate, "skipped": skipped}
    return out
