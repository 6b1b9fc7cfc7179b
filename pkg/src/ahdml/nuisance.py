"""Nuisance mechanisms: propensity, conditional event and censoring survival.

Three learner families sit behind one prediction interface: Cox proportional
hazards (Breslow ties and baseline, optional treatment-covariate
interactions), parametric accelerated-failure-time models (exponential,
Weibull, log-logistic) and stratified product-limit curves.  A censoring
model is the same machinery fit on the flipped event indicator; under the
events-first tie rule a unit with an event at t stays in the censoring risk
set at t, which the standard ``u >= t`` risk set already encodes.

Survival predictions are floored at the model's truncation level; censoring
curves are read as P(C >= t), i.e. as left limits of the fitted step curve.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ._optim import newton_linesearch
from .curves import km_estimate
from .data import Dataset
from .errors import NonConvergenceError, UnfittableError

__all__ = [
    "PropensityModel",
    "ConditionalSurvivalModel",
    "CoxSurvivalModel",
    "AftSurvivalModel",
    "StratifiedKmModel",
    "LearnerSpec",
    "LearnerConfig",
    "NuisanceTriple",
    "fit_propensity",
    "fit_cox",
    "fit_parametric_aft",
    "fit_stratified_km",
    "fit_survival_learner",
    "fit_nuisance_triple",
    "select_learner",
    "survival_mixed",
    "cox_partial_loglik",
    "train_fingerprint",
]

DEFAULT_EPSILON = 0.025    # propensity and censoring floor
DEFAULT_FLOOR_S = 0.005    # event-survival floor


# ---------------------------------------------------------------------------
# design matrices

def propensity_design(W: np.ndarray, basis: str) -> np.ndarray:
    W = np.atleast_2d(np.asarray(W, float))
    cols = [np.ones(W.shape[0]), W]
    if basis == "poly2":
        cols.append(W**2)
    elif basis == "interactions":
        cols.append(W**2)
        d = W.shape[1]
        cols.extend(W[:, i] * W[:, j] for i in range(d) for j in range(i + 1, d))
    elif basis != "raw":
        raise ValueError(f"unknown propensity basis {basis!r}")
    return np.column_stack(cols)


def survival_design(a, W, interactions: bool, features: str, intercept: bool) -> np.ndarray:
    W = np.atleast_2d(np.asarray(W, float))
    a = np.broadcast_to(np.asarray(a, float), (W.shape[0],))
    cols = [a, W]
    if features == "poly2":
        cols.append(W**2)
    elif features != "raw":
        raise ValueError(f"unknown feature set {features!r}")
    if interactions:
        cols.append(a[:, None] * W)
    if intercept:
        cols.insert(0, np.ones(W.shape[0]))
    return np.column_stack(cols)


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, float)))


def _standardize(X: np.ndarray, skip: int = 0):
    """Center/scale columns (after the first ``skip``) for solver conditioning.

    Returns the standardized matrix and the (mean, scale) pair needed by
    :func:`_destandardize` to map coefficients back to the raw scale.
    """
    m = X.mean(axis=0)
    s = X.std(axis=0)
    m[:skip] = 0.0
    s[:skip] = 1.0
    s[s < 1e-12] = 1.0
    return (X - m) / s, (m, s)


def _destandardize(beta_std: np.ndarray, transform, intercept_index: int | None):
    """Map standardized-scale coefficients back to the raw design scale."""
    m, s = transform
    beta = beta_std / s
    if intercept_index is not None:
        # m is zero at the intercept, so the full sum is over the other columns
        beta[intercept_index] = beta_std[intercept_index] - float(np.sum(beta_std * m / s))
    return beta


def _outcome_view(train: Dataset, outcome: str, horizon: float | None):
    """Follow-up and indicator for the requested outcome, horizon-truncated.

    The truncation happens after the censoring flip, so units followed past
    the horizon are non-events for BOTH outcome models (they are at risk
    through the horizon and administratively censored there).
    """
    delta = train.delta if outcome == "event" else 1 - train.delta
    u = train.u.astype(float)
    if horizon is not None:
        delta = np.where(u <= horizon, delta, 0)
        u = np.minimum(u, horizon)
    return u, delta.astype(int)


# ---------------------------------------------------------------------------
# propensity

@dataclass(frozen=True)
class PropensityModel:
    """Logistic propensity with truncation to [epsilon, 1 - epsilon]."""

    basis: str
    coef: np.ndarray
    epsilon: float
    stabilized: bool = False   # True when the ridge fallback was used

    def predict(self, W: np.ndarray, a: int) -> np.ndarray:
        X = propensity_design(W, self.basis)
        p1 = np.clip(_expit(X @ self.coef), self.epsilon, 1.0 - self.epsilon)
        return p1 if a == 1 else 1.0 - p1


def fit_propensity(train: Dataset, basis: str = "raw",
                   epsilon: float = DEFAULT_EPSILON) -> PropensityModel:
    """Maximum-likelihood logistic fit via IRLS.

    Converged when the max score component drops below 1e-8 (at most 50
    iterations).  On separation the fit falls back to a ridge-stabilized
    IRLS (lambda = 1e-6), flagged on the returned model.
    """
    y = train.a.astype(float)
    if y.min() == y.max():
        raise UnfittableError("both treatment arms required to fit a propensity model")
    X, transform = _standardize(propensity_design(train.w, basis), skip=1)
    p_dim = X.shape[1]

    def irls(ridge):
        beta = np.zeros(p_dim)
        for _ in range(50):
            lp = X @ beta
            if ridge == 0.0 and np.max(np.abs(lp)) > 30:
                return beta, False        # separation: perfect-fit drift
            p = _expit(lp)
            score = X.T @ (y - p) - ridge * beta
            if np.max(np.abs(score)) < 1e-8:
                return beta, True
            v = np.maximum(p * (1 - p), 1e-10)
            H = (X * v[:, None]).T @ X + ridge * np.eye(p_dim)
            try:
                beta = beta + np.linalg.solve(H, score)
            except np.linalg.LinAlgError:
                return beta, False
        return beta, ridge > 0.0          # penalized IRLS iterate is acceptable

    beta, ok = irls(0.0)
    stabilized = False
    if not ok:
        beta, ok = irls(1e-6)
        stabilized = True
        if not ok:
            raise NonConvergenceError("propensity IRLS did not converge", last_iterate=beta)
    return PropensityModel(basis=basis, coef=_destandardize(beta, transform, 0),
                           epsilon=epsilon, stabilized=stabilized)


# ---------------------------------------------------------------------------
# conditional survival models

class ConditionalSurvivalModel:
    """Prediction interface shared by all conditional survival learners.

    ``survival`` evaluates S(t | a, w) for every unit at a common time grid;
    ``survival_at`` evaluates each unit at its own time.  ``side='left'``
    returns left limits (used for censoring curves read as P(C >= t); for
    the smooth parametric families both sides coincide).  ``hazard_basis``
    lists the jump support of the implied cumulative hazard, a fine grid for
    smooth families.
    """

    kind: str = ""
    floor: float = 0.0

    def survival(self, times, a, W, side="right") -> np.ndarray:
        raise NotImplementedError

    def survival_at(self, t, a, W, side="right") -> np.ndarray:
        raise NotImplementedError

    def hazard_basis(self, t_max: float) -> np.ndarray:
        raise NotImplementedError

    def _clip(self, s):
        return np.clip(s, self.floor, 1.0)


@dataclass(frozen=True)
class CoxSurvivalModel(ConditionalSurvivalModel):
    coef: np.ndarray
    baseline_times: np.ndarray     # ascending event times of the training data
    baseline_cumhaz: np.ndarray    # Breslow cumulative hazard at those times
    interactions: bool
    features: str
    floor: float
    kind: str = "cox-ph"

    def _lp(self, a, W):
        return survival_design(a, W, self.interactions, self.features, intercept=False) @ self.coef

    def _cumhaz_at(self, times, side):
        idx = np.searchsorted(self.baseline_times, times,
                              side="right" if side == "right" else "left")
        padded = np.concatenate(([0.0], self.baseline_cumhaz))
        return padded[idx]

    def survival(self, times, a, W, side="right"):
        lam = self._cumhaz_at(np.asarray(times, float), side)
        return self._clip(np.exp(-np.outer(np.exp(self._lp(a, W)), lam)))

    def survival_at(self, t, a, W, side="right"):
        lam = self._cumhaz_at(np.asarray(t, float), side)
        return self._clip(np.exp(-np.exp(self._lp(a, W)) * lam))

    def hazard_basis(self, t_max):
        return self.baseline_times[self.baseline_times <= t_max]


@dataclass(frozen=True)
class AftSurvivalModel(ConditionalSurvivalModel):
    family: str                     # exponential | weibull | loglogistic
    coef: np.ndarray                # log-time regression incl. intercept
    log_scale: float
    interactions: bool
    features: str
    floor: float
    basis_step: float = 0.02
    kind: str = "aft"

    def _lp(self, a, W):
        return survival_design(a, W, self.interactions, self.features, intercept=True) @ self.coef

    def _surv(self, t, lp):
        t = np.maximum(np.asarray(t, float), 0.0)
        with np.errstate(divide="ignore"):
            z = (np.log(t) - lp) / np.exp(self.log_scale)
        if self.family == "loglogistic":
            return self._clip(_expit(-z))
        return self._clip(np.exp(-np.exp(np.minimum(z, 500.0))))

    def survival(self, times, a, W, side="right"):
        lp = self._lp(a, W)
        return self._surv(np.asarray(times, float)[None, :], lp[:, None])

    def survival_at(self, t, a, W, side="right"):
        return self._surv(t, self._lp(a, W))

    def hazard_basis(self, t_max):
        n = max(int(np.ceil(t_max / self.basis_step)), 1)
        return np.linspace(t_max / n, t_max, n)


@dataclass(frozen=True)
class StratifiedKmModel(ConditionalSurvivalModel):
    """Product-limit curves per (a, w) stratum, arm-only when w is rich.

    Saturated in (a, w) for low-cardinality covariates; otherwise falls back
    to arm-level curves, as do predictions for unseen strata.
    """

    arm_curves: dict
    strata_curves: dict
    by_pattern: bool
    floor: float
    kind: str = "stratified-km"

    def _curve(self, a, w_row):
        if self.by_pattern:
            key = (int(a),) + tuple(np.round(np.asarray(w_row, float), 12))
            if key in self.strata_curves:
                return self.strata_curves[key]
        return self.arm_curves[int(a)]

    def survival(self, times, a, W, side="right"):
        W = np.atleast_2d(np.asarray(W, float))
        a_vec = np.broadcast_to(np.asarray(a, int), (W.shape[0],))
        times = np.asarray(times, float)
        out = np.empty((W.shape[0], times.size))
        for i in range(W.shape[0]):
            out[i] = self._curve(a_vec[i], W[i])(times, side=side)
        return self._clip(out)

    def survival_at(self, t, a, W, side="right"):
        W = np.atleast_2d(np.asarray(W, float))
        a_vec = np.broadcast_to(np.asarray(a, int), (W.shape[0],))
        t = np.broadcast_to(np.asarray(t, float), (W.shape[0],))
        out = np.empty(W.shape[0])
        for i in range(W.shape[0]):
            out[i] = float(self._curve(a_vec[i], W[i])(t[i], side=side))
        return self._clip(out)

    def hazard_basis(self, t_max):
        ts = [c.times for c in self.arm_curves.values()]
        ts += [c.times for c in self.strata_curves.values()]
        allt = np.unique(np.concatenate(ts)) if ts else np.array([])
        return allt[(allt > 0) & (allt <= t_max)]


def survival_mixed(model: ConditionalSurvivalModel, times, a_vec, W, side="right"):
    """S(t | a_i, w_i) on a shared grid for units with mixed arms."""
    a_vec = np.asarray(a_vec, int)
    W = np.atleast_2d(W)
    out = np.empty((len(a_vec), len(np.asarray(times))))
    for arm in (0, 1):
        mask = a_vec == arm
        if mask.any():
            out[mask] = model.survival(times, arm, W[mask], side=side)
    return out


# ---------------------------------------------------------------------------
# Cox fitting (Breslow partial likelihood)

def cox_partial_loglik(beta, u, delta, X):
    """Breslow partial log-likelihood at ``beta`` (tied events share denominators)."""
    u = np.asarray(u, float)
    order = np.argsort(u, kind="stable")
    u, delta, X = u[order], np.asarray(delta, int)[order], np.atleast_2d(X)[order]
    lp = X @ np.asarray(beta, float)
    shift = lp.max()
    rev = np.cumsum(np.exp(lp - shift)[::-1])[::-1]
    denom = rev[np.searchsorted(u, u, side="left")]
    ev = delta == 1
    return float(np.sum(lp[ev] - (np.log(denom[ev]) + shift)))


def fit_cox(train: Dataset, outcome: str = "event", interactions: bool = False,
            features: str = "raw", floor: float = DEFAULT_FLOOR_S,
            max_iter: int = 100, beta_init=None,
            horizon: float | None = None) -> CoxSurvivalModel:
    """Newton-Raphson on the Breslow partial likelihood with Breslow baseline.

    ``outcome='censoring'`` flips the event indicator.  ``max_iter=0``
    freezes the coefficients at ``beta_init`` (zeros reproduce the
    Nelson-Aalen baseline exactly).
    """
    u_raw, delta = _outcome_view(train, outcome, horizon)
    if delta.sum() == 0:
        raise UnfittableError(f"no {outcome} occurrences in training data")
    X_raw = survival_design(train.a, train.w, interactions, features, intercept=False)
    X_std, transform = _standardize(X_raw)
    order = np.argsort(u_raw, kind="stable")
    u, dlt, Xs = u_raw[order], delta[order], X_std[order]
    n, p = Xs.shape
    ev = dlt == 1
    first_idx = np.searchsorted(u, u, side="left")

    beta = np.zeros(p) if beta_init is None else np.asarray(beta_init, float).copy()
    converged = max_iter == 0

    def score_at(b):
        lp = Xs @ b
        e = np.exp(lp - lp.max())
        s0 = np.cumsum(e[::-1])[::-1][first_idx]
        s1 = np.cumsum((Xs * e[:, None])[::-1], axis=0)[::-1][first_idx]
        return np.sum(Xs[ev] - s1[ev] / s0[ev, None], axis=0)

    for _ in range(max_iter):
        lp = Xs @ beta
        e = np.exp(lp - lp.max())
        s0 = np.cumsum(e[::-1])[::-1][first_idx]
        s1 = np.cumsum((Xs * e[:, None])[::-1], axis=0)[::-1][first_idx]
        xe = Xs[:, :, None] * Xs[:, None, :] * e[:, None, None]
        s2 = np.cumsum(xe[::-1], axis=0)[::-1][first_idx]
        xbar = s1 / s0[:, None]
        score = np.sum(Xs[ev] - xbar[ev], axis=0)
        if np.max(np.abs(score)) < 1e-8:
            converged = True
            break
        info = np.sum(s2[ev] / s0[ev, None, None]
                      - xbar[ev, :, None] * xbar[ev, None, :], axis=0)
        try:
            step = np.linalg.solve(info + 1e-12 * np.eye(p), score)
        except np.linalg.LinAlgError:
            step = score
        ll0 = cox_partial_loglik(beta, u, dlt, Xs)
        t = 1.0
        for _ in range(30):
            if cox_partial_loglik(beta + t * step, u, dlt, Xs) >= ll0 - 1e-12:
                break
            t *= 0.5
        beta = beta + t * step
        if np.max(np.abs(beta)) > 1e3:
            raise NonConvergenceError("cox coefficients diverging (separation?)",
                                      last_iterate=beta)
    if not converged and np.max(np.abs(score_at(beta))) >= 1e-5:
        raise NonConvergenceError(f"cox fit: no convergence in {max_iter} iterations",
                                  last_iterate=beta)

    # map back to the raw covariate scale, then Breslow baseline on raw lp
    beta_raw = _destandardize(beta, transform, None)
    lp = X_raw[order] @ beta_raw
    e = np.exp(lp - lp.max())
    s0 = np.cumsum(e[::-1])[::-1][first_idx] * np.exp(lp.max())
    etimes, d = np.unique(u[ev], return_counts=True)
    denom = s0[np.searchsorted(u, etimes, side="left")]
    base = np.cumsum(d / denom)
    return CoxSurvivalModel(
        coef=beta_raw, baseline_times=etimes, baseline_cumhaz=base,
        interactions=interactions, features=features, floor=floor,
        kind="cox-ph-interactions" if interactions else "cox-ph",
    )


# ---------------------------------------------------------------------------
# parametric AFT fitting

def fit_parametric_aft(train: Dataset, family: str, outcome: str = "event",
                       features: str = "raw", interactions: bool = False,
                       floor: float = DEFAULT_FLOOR_S,
                       horizon: float | None = None) -> AftSurvivalModel:
    """Right-censored maximum likelihood for exponential, Weibull or
    log-logistic accelerated failure time models (Newton with line search,
    score tolerance 1e-8)."""
    if family not in ("exponential", "weibull", "loglogistic"):
        raise ValueError(f"unknown AFT family {family!r}")
    u_view, delta_view = _outcome_view(train, outcome, horizon)
    delta = delta_view.astype(float)
    if delta.sum() == 0:
        raise UnfittableError(f"no {outcome} occurrences in training data")
    X, transform = _standardize(
        survival_design(train.a, train.w, interactions, features, intercept=True), skip=1)
    logu = np.log(np.maximum(u_view, 1e-12))
    p = X.shape[1]
    has_scale = family != "exponential"

    def unpack(theta):
        return theta[:p], (theta[p] if has_scale else 0.0)

    def negloglik(theta):
        beta, s = unpack(theta)
        if abs(s) > 30.0:          # line-search probe far outside the sane range
            return np.inf
        with np.errstate(over="ignore"):
            z = (logu - X @ beta) / np.exp(s)
            if family == "loglogistic":
                ll = delta * (-s - logu + z) - (1 + delta) * np.logaddexp(0.0, z)
            else:
                ll = delta * (-s - logu + z) - np.exp(np.minimum(z, 500.0))
        total = float(np.sum(ll))
        return -total if np.isfinite(total) else np.inf

    def grad(theta):
        beta, s = unpack(theta)
        sigma = np.exp(s)
        z = (logu - X @ beta) / sigma
        if family == "loglogistic":
            dldz = delta - (1 + delta) * _expit(z)
        else:
            dldz = delta - np.exp(np.minimum(z, 500.0))
        dl_dbeta = -(X * dldz[:, None]).sum(axis=0) / sigma
        if not has_scale:
            return -dl_dbeta
        dl_ds = float(np.sum(-dldz * z - delta))
        return -np.concatenate([dl_dbeta, [dl_ds]])

    rate0 = max(delta.sum(), 1.0) / max(u_view.sum(), 1e-12)
    theta0 = np.zeros(p + (1 if has_scale else 0))
    theta0[0] = -np.log(rate0)
    if has_scale:
        # warm-start the scale families from the concave exponential subfit
        expo = fit_parametric_aft(train, "exponential", outcome, features,
                                  interactions, floor, horizon)
        beta0 = expo.coef.copy()
        beta0[0] += float(np.sum(expo.coef[1:] * transform[0][1:]))
        theta0[:p] = beta0 * transform[1]
        theta0[0] = beta0[0]
    theta = newton_linesearch(negloglik, grad, theta0, tol=1e-8, max_iter=100,
                              name=f"{family}-aft")
    beta, s = unpack(theta)
    return AftSurvivalModel(family=family, coef=_destandardize(beta, transform, 0),
                            log_scale=float(s),
                            interactions=interactions, features=features, floor=floor,
                            kind=f"{family}-aft")


def fit_stratified_km(train: Dataset, outcome: str = "event",
                      floor: float = DEFAULT_FLOOR_S, max_strata: int = 32,
                      horizon: float | None = None) -> StratifiedKmModel:
    u_view, delta = _outcome_view(train, outcome, horizon)
    if delta.sum() == 0:
        raise UnfittableError(f"no {outcome} occurrences in training data")
    arm_curves = {}
    for arm in (0, 1):
        mask = train.a == arm
        if not mask.any():
            raise UnfittableError("both arms required for stratified product-limit curves")
        arm_curves[arm] = km_estimate(u_view[mask], delta[mask])
    rows = [tuple(r) for r in np.round(train.w, 12)]
    by_pattern = len(set(rows)) * 2 <= max_strata
    strata_curves = {}
    if by_pattern:
        for key in sorted(set((int(a),) + r for a, r in zip(train.a, rows))):
            mask = (train.a == key[0]) & np.all(np.round(train.w, 12) == np.asarray(key[1:]), axis=1)
            if delta[mask].sum() > 0:
                strata_curves[key] = km_estimate(u_view[mask], delta[mask])
    return StratifiedKmModel(arm_curves=arm_curves, strata_curves=strata_curves,
                             by_pattern=by_pattern, floor=floor)


# ---------------------------------------------------------------------------
# learner registry and discrete cross-validated selection

@dataclass(frozen=True)
class LearnerSpec:
    """One candidate in the survival learner registry."""

    kind: str                 # cox-ph | cox-ph-interactions | exponential-aft |
                              # weibull-aft | loglogistic-aft | stratified-km
    features: str = "raw"

    def label(self):
        return self.kind if self.features == "raw" else f"{self.kind}+{self.features}"


def fit_survival_learner(spec: LearnerSpec, train: Dataset, outcome: str,
                         floor: float, horizon: float | None = None) -> ConditionalSurvivalModel:
    if spec.kind == "cox-ph":
        return fit_cox(train, outcome, interactions=False, features=spec.features,
                       floor=floor, horizon=horizon)
    if spec.kind == "cox-ph-interactions":
        return fit_cox(train, outcome, interactions=True, features=spec.features,
                       floor=floor, horizon=horizon)
    if spec.kind in ("exponential-aft", "weibull-aft", "loglogistic-aft"):
        return fit_parametric_aft(train, spec.kind.split("-")[0], outcome,
                                  features=spec.features, floor=floor, horizon=horizon)
    if spec.kind == "stratified-km":
        return fit_stratified_km(train, outcome, floor=floor, horizon=horizon)
    raise ValueError(f"unknown learner kind {spec.kind!r}")


def _binned_nll(model, test: Dataset, delta, edges):
    """Right-censored negative log-likelihood on a shared time binning.

    Event contributions use the bin probability mass (well-defined for both
    smooth and step families); censored contributions use the exact survival
    at the censoring time.
    """
    s_edges = survival_mixed(model, edges, test.a, test.w)
    bin_idx = np.clip(np.searchsorted(edges, test.u, side="left") - 1, 0, len(edges) - 2)
    rows = np.arange(test.n)
    mass = np.maximum(s_edges[rows, bin_idx] - s_edges[rows, bin_idx + 1], 1e-12)
    surv = np.empty(test.n)
    for arm in (0, 1):
        sel = test.a == arm
        if sel.any():
            surv[sel] = model.survival_at(test.u[sel], arm, test.w[sel])
    surv = np.maximum(surv, 1e-12)
    return float(np.mean(np.where(delta == 1, -np.log(mass), -np.log(surv))))


def select_learner(train: Dataset, candidates, v_folds: int = 3, outcome: str = "event",
                   floor: float = DEFAULT_FLOOR_S, seed: int = 0,
                   bin_width: float = 0.25,
                   horizon: float | None = None) -> ConditionalSurvivalModel:
    """Discrete cross-validated selection over the candidate registry.

    CV risk is the mean binned right-censored negative log-likelihood on
    held-out inner folds; the risk-minimizing candidate (first listed wins
    ties) is refit on all of ``train``.
    """
    candidates = list(candidates)
    if not candidates:
        raise UnfittableError("empty candidate registry")
    if len(candidates) == 1:
        return fit_survival_learner(candidates[0], train, outcome, floor, horizon)
    if v_folds < 2:
        raise ValueError("v_folds must be >= 2")
    u_view, delta = _outcome_view(train, outcome, horizon)
    view = Dataset(train.w, train.a, u_view, delta)
    cap = float(np.max(u_view)) + bin_width
    edges = np.arange(0.0, cap + bin_width, bin_width)
    rng = np.random.default_rng(seed)
    folds = np.resize(np.arange(v_folds), train.n)
    rng.shuffle(folds)
    risks = np.full(len(candidates), np.inf)
    for ci, spec in enumerate(candidates):
        try:
            losses = []
            for k in range(v_folds):
                fit = fit_survival_learner(spec, train.subset(folds != k), outcome,
                                           floor, horizon)
                losses.append(_binned_nll(fit, view.subset(folds == k),
                                          delta[folds == k], edges))
            risks[ci] = float(np.mean(losses))
        except (UnfittableError, NonConvergenceError):
            continue
    if not np.any(np.isfinite(risks)):
        raise UnfittableError("no candidate learner was fittable on every inner fold")
    return fit_survival_learner(candidates[int(np.argmin(risks))], train, outcome,
                                floor, horizon)


# ---------------------------------------------------------------------------
# the fitted triple

@dataclass(frozen=True)
class LearnerConfig:
    """Registry and truncation levels used by the estimation pipeline."""

    propensity_basis: str = "poly2"
    epsilon: float = DEFAULT_EPSILON
    floor_s: float = DEFAULT_FLOOR_S
    event_candidates: tuple = (LearnerSpec("cox-ph-interactions"), LearnerSpec("weibull-aft"))
    censor_candidates: tuple = (LearnerSpec("exponential-aft"), LearnerSpec("weibull-aft"))
    v_folds: int = 3
    fixed_nuisances: "NuisanceTriple | None" = None   # bypass fitting (oracle mode)


@dataclass(frozen=True)
class NuisanceTriple:
    """Propensity, event survival and censoring survival fit on one fold."""

    propensity: PropensityModel
    event: ConditionalSurvivalModel
    censor: ConditionalSurvivalModel
    fold_id: int = -1
    train_fingerprint: str = ""


def train_fingerprint(indices) -> str:
    idx = np.sort(np.asarray(indices, dtype=np.int64))
    return hashlib.sha256(idx.tobytes()).hexdigest()[:16]


def fit_nuisance_triple(train: Dataset, config: LearnerConfig, fold_id: int = -1,
                        indices=None, seed: int = 0,
                        horizon: float | None = None) -> NuisanceTriple:
    prop = fit_propensity(train, config.propensity_basis, config.epsilon)
    event = select_learner(train, config.event_candidates, config.v_folds, "event",
                           config.floor_s, seed=seed, horizon=horizon)
    censor = select_learner(train, config.censor_candidates, config.v_folds, "censoring",
                            config.epsilon, seed=seed + 1, horizon=horizon)
    fp = train_fingerprint(indices) if indices is not None else ""
    return NuisanceTriple(prop, event, censor, fold_id=fold_id, train_fingerprint=fp)
