"""Synthetic data-generating mechanisms with closed-form truth oracles.

Four mechanisms share one covariate law (age-like w1, BMI-like w2 positively
associated with age, and a risk score w3 peaking at extreme ages) and one
nonlinear treatment mechanism:

* ``ph``          Weibull proportional-hazards events, exponential censoring
                  with a linear log-rate in (a, w);
* ``ph-complex``  same events, Weibull censoring with interaction structure;
* ``non-ph``      exponential control times with a smooth covariate-dependent
                  time warp for the treated arm (delayed benefit);
* ``cross-a``     a warp variant with early benefit and late harm (crossing
                  hazards).

Event times are drawn by analytic inversion of the conditional cumulative
hazard, so the same closed forms double as oracle nuisances and truth
curves.  The warp integral's three branches are derived analytically and
checked for continuity at the joins to 1e-12.

The censoring log-rate of the warp mechanisms reads its age term as
softplus((30 - w1) / 3); this reading reproduces the intended ~20% control
censoring by month 12.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .curves import StepSurvivalCurve, average_hazard, log_ah_ratio
from .data import Dataset
from .errors import DomainError
from .nuisance import ConditionalSurvivalModel, NuisanceTriple

__all__ = [
    "PhCoeffs",
    "LinearCensorCoeffs",
    "WarpCoeffs",
    "DgmSpec",
    "TruthRecord",
    "make_dgm",
    "DGM_NAMES",
    "sample_covariates",
    "propensity_true",
    "sample_dataset",
    "sample_ph",
    "sample_warp",
    "event_times_given",
    "censoring_times_given",
    "warp_phi",
    "warp_phi_prime",
    "truth_theta",
    "oracle_nuisances",
    "OraclePropensity",
    "OracleEventModel",
    "OracleCensorModel",
]


def _softplus(x):
    x = np.asarray(x, float)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, float)))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# coefficient blocks (defaults are the canonical mechanism)

@dataclass(frozen=True)
class PhCoeffs:
    """Weibull proportional-hazards linear predictor on (a, w)."""

    alpha: float = 1.5
    intercept_control: float = -5.6
    intercept_treated: float = -5.96
    b_w1: float = 0.2          # on (w1 - 50) / 10
    b_w1_a: float = -0.15
    b_w3: float = 0.2          # on (w3 - 5)
    b_w3_a: float = -0.15
    b_w1w3: float = 0.1        # on (w3 - 5)(w1 - 50) / 10
    b_w2: float = 0.05         # on (w2 - 30)
    b_w2_a: float = -0.025

    def eta(self, a, W):
        W = np.atleast_2d(np.asarray(W, float))
        a = np.broadcast_to(np.asarray(a, float), (W.shape[0],))
        z1 = (W[:, 0] - 50.0) / 10.0
        z2 = W[:, 1] - 30.0
        z3 = W[:, 2] - 5.0
        return (self.intercept_control
                + (self.intercept_treated - self.intercept_control) * a
                + self.b_w1 * z1 + self.b_w1_a * a * z1
                + self.b_w3 * z3 + self.b_w3_a * a * z3
                + self.b_w1w3 * z3 * z1
                + self.b_w2 * z2 + self.b_w2_a * a * z2)


@dataclass(frozen=True)
class LinearCensorCoeffs:
    """Exponential censoring with a linear log-rate in (a, w)."""

    intercept: float = -3.8
    b_a: float = 0.3
    b_w1: float = 0.20         # on (w1 - 50) / 10
    b_w2: float = 0.05         # on (w2 - 30) / 10
    b_w3: float = 0.20         # on (w3 - 5)

    def log_rate(self, a, W):
        W = np.atleast_2d(np.asarray(W, float))
        a = np.broadcast_to(np.asarray(a, float), (W.shape[0],))
        return (self.intercept + self.b_a * a
                + self.b_w1 * (W[:, 0] - 50.0) / 10.0
                + self.b_w2 * (W[:, 1] - 30.0) / 10.0
                + self.b_w3 * (W[:, 2] - 5.0))


@dataclass(frozen=True)
class WarpCoeffs:
    """Exponential control times plus a covariate-dependent treated-arm warp."""

    base_intercept: float = 1.0
    gamma_intercept: float = -1.64
    ramp: float = 1.5              # months before the full effect
    late_excess: float = 0.5       # late-harm factor (cross-a only)
    censor_intercept: float = -4.9
    censor_b_a: float = 0.3
    force_gamma: float | None = None   # pin gamma(w) (1.0 gives identical arms)

    def base_rate(self, W):
        W = np.atleast_2d(np.asarray(W, float))
        return np.exp(self.base_intercept - np.abs(W[:, 0] - 60.0) / 10.0
                      - 2.0 * np.log(W[:, 1]) + W[:, 2] / 2.0)

    def gamma(self, W):
        W = np.atleast_2d(np.asarray(W, float))
        if self.force_gamma is not None:
            return np.full(W.shape[0], float(self.force_gamma))
        return _expit(self.gamma_intercept
                      + 0.5 * _softplus((W[:, 0] - 55.0) / 5.0)
                      + 0.25 * _softplus((W[:, 1] - 30.0) / 3.0))

    def iota(self, W):
        W = np.atleast_2d(np.asarray(W, float))
        return np.exp(2.0 - 0.5 * _softplus((W[:, 0] - 55.0) / 5.0)
                      - 0.1 * _softplus((W[:, 1] - 30.0) / 3.0))

    def censor_log_rate(self, a, W):
        W = np.atleast_2d(np.asarray(W, float))
        a = np.broadcast_to(np.asarray(a, float), (W.shape[0],))
        return (self.censor_intercept + self.censor_b_a * a
                + _softplus((30.0 - W[:, 0]) / 3.0)
                + ((W[:, 2] - 5.0) / 4.0) ** 2)


@dataclass(frozen=True)
class DgmSpec:
    """A fully parameterized mechanism; defaults match the canonical study."""

    kind: str                                  # ph | ph-complex | non-ph | cross-a
    admin_cap: float = 24.0
    seed: int | None = None
    event: PhCoeffs = PhCoeffs()
    censor_ph: PhCoeffs = PhCoeffs(intercept_control=-4.7, intercept_treated=-5.1)
    censor_linear: LinearCensorCoeffs = LinearCensorCoeffs()
    warp: WarpCoeffs = WarpCoeffs()

    def __post_init__(self):
        if self.kind not in ("ph", "ph-complex", "non-ph", "cross-a"):
            raise DomainError(f"unknown mechanism kind {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DgmSpec":
        d = dict(d)
        for key, sub in (("event", PhCoeffs), ("censor_ph", PhCoeffs),
                         ("censor_linear", LinearCensorCoeffs), ("warp", WarpCoeffs)):
            if key in d and isinstance(d[key], dict):
                d[key] = sub(**d[key])
        return cls(**d)


DGM_NAMES = ("ph", "ph-complex", "non-ph", "cross-a", "null")


def make_dgm(name: str, seed: int | None = None) -> DgmSpec:
    """Named presets; ``null`` is the non-ph warp with gamma pinned at 1."""
    if name == "null":
        return DgmSpec(kind="non-ph", seed=seed,
                       warp=WarpCoeffs(force_gamma=1.0))
    return DgmSpec(kind=name, seed=seed)


# ---------------------------------------------------------------------------
# covariates and treatment

def sample_covariates(n: int, rng) -> np.ndarray:
    """Draw (w1, w2, w3) in the stated dependency order w1, w3|w1, w2|w1."""
    rng = _as_rng(rng)
    w1 = 20.0 + 60.0 * rng.beta(1.1, 1.1, size=n)
    w3 = 10.0 * rng.beta(1.5 + np.abs(w1 - 50.0) / 20.0, 3.0)
    w2 = 18.0 + 32.0 * rng.beta(1.5 + w1 / 20.0, 6.0)
    return np.column_stack([w1, w2, w3])


def propensity_true(W) -> np.ndarray:
    """P(A=1 | w); nonlinear by design, bounded away from 0 and 1."""
    W = np.atleast_2d(np.asarray(W, float))
    inner = np.logaddexp(0.0, np.logaddexp(-20.0 + W[:, 0] / 10.0,
                                           -3.0 + W[:, 2] / 2.0))
    return _expit(-1.0 + inner)


# ---------------------------------------------------------------------------
# warp machinery (closed-form integral of the hazard multiplier)

def _warp_pieces(spec: DgmSpec, W):
    w = spec.warp
    gam = w.gamma(W)
    iot = w.iota(W)
    r = w.ramp
    m = r + iot
    return gam, iot, r, m


def _align(t, gam, m):
    """Broadcast unit-level (gam, m) against times of shape (), (k,) or (n, k)."""
    t = np.asarray(t, float)
    if t.ndim == 2:
        return t, gam[:, None], m[:, None]
    gam_b, t_b = np.broadcast_arrays(gam, t)
    return t_b, gam_b, np.broadcast_to(m, t_b.shape)


def warp_phi_prime(spec: DgmSpec, t, W) -> np.ndarray:
    """Hazard multiplier phi'(t, w) for the treated arm."""
    gam, _, r, m = _warp_pieces(spec, W)
    t, gam, m = _align(t, gam, m)
    if spec.kind == "cross-a":
        eps = spec.warp.late_excess
        return np.where(t <= r, 1.0 - gam,
                        np.where(t <= m, gam, 1.0 + eps * (1.0 - gam)))
    return np.where(t <= r, 1.0 - (t / r) * (1.0 - gam),
                    np.where(t <= m, gam,
                             1.0 - (1.0 - gam) * m**2 / np.maximum(t, m) ** 2))


def warp_phi(spec: DgmSpec, t, W) -> np.ndarray:
    """Closed-form integral of phi' over [0, t], branchwise."""
    gam, _, r, m = _warp_pieces(spec, W)
    t, gam, m = _align(t, gam, m)
    k = 1.0 - gam
    if spec.kind == "cross-a":
        eps = spec.warp.late_excess
        phi_r = k * r
        phi_m = phi_r + gam * (m - r)
        return np.where(
            t <= r, k * t,
            np.where(t <= m, phi_r + gam * (t - r),
                     phi_m + (1.0 + eps * k) * (t - m)))
    phi_r = r - k * r / 2.0                         # = r (1 + gamma) / 2
    phi_m = phi_r + gam * (m - r)
    t_safe = np.maximum(t, m)
    late = phi_m + (t - m) - k * (m - m**2 / t_safe)
    return np.where(t <= r, t - k * t**2 / (2.0 * r),
                    np.where(t <= m, phi_r + gam * (t - r), late))


def _warp_phi_inverse(spec: DgmSpec, s, W) -> np.ndarray:
    """Solve phi(t, w) = s for t; branchwise analytic inversion."""
    gam, _, r, m = _warp_pieces(spec, W)
    s = np.asarray(s, float)
    gam, s = np.broadcast_arrays(gam, s)
    m = np.broadcast_to(np.asarray(m), s.shape)
    k = 1.0 - gam
    if spec.kind == "cross-a":
        phi_r = k * r
        phi_m = phi_r + gam * (m - r)
        with np.errstate(divide="ignore", invalid="ignore"):
            early = np.where(k > 0, s / np.where(k > 0, k, 1.0), np.inf)
            mid = r + (s - phi_r) / np.where(gam > 0, gam, 1.0)
        late = m + (s - phi_m) / (1.0 + spec.warp.late_excess * k)
        return np.where(s <= phi_r, early, np.where(s <= phi_m, mid, late))
    phi_r = r - k * r / 2.0
    phi_m = phi_r + gam * (m - r)
    a_coef = k / (2.0 * r)
    disc = np.sqrt(np.maximum(1.0 - 4.0 * a_coef * np.minimum(s, phi_r), 0.0))
    early = 2.0 * np.minimum(s, phi_r) / (1.0 + disc)
    mid = r + (s - phi_r) / np.where(gam > 0, gam, 1.0)
    b_coef = m + k * m + (s - phi_m)
    late = 0.5 * (b_coef + np.sqrt(np.maximum(b_coef**2 - 4.0 * k * m**2, 0.0)))
    return np.where(s <= phi_r, early, np.where(s <= phi_m, mid, late))


# ---------------------------------------------------------------------------
# conditional samplers (analytic inverse of the cumulative hazard)

def event_times_given(spec: DgmSpec, arm: int, W, rng) -> np.ndarray:
    """Counterfactual event times T(arm) given covariates."""
    rng = _as_rng(rng)
    W = np.atleast_2d(np.asarray(W, float))
    e = rng.exponential(size=W.shape[0])
    if spec.kind in ("ph", "ph-complex"):
        alpha = spec.event.alpha
        return (alpha * e * np.exp(-spec.event.eta(arm, W))) ** (1.0 / alpha)
    lam0 = spec.warp.base_rate(W)
    if arm == 0:
        return e / lam0
    return _warp_phi_inverse(spec, e / lam0, W)


def censoring_times_given(spec: DgmSpec, arm: int, W, rng) -> np.ndarray:
    """Latent censoring times C given covariates (before the admin cap)."""
    rng = _as_rng(rng)
    W = np.atleast_2d(np.asarray(W, float))
    e = rng.exponential(size=W.shape[0])
    if spec.kind == "ph-complex":
        alpha = spec.censor_ph.alpha
        return (alpha * e * np.exp(-spec.censor_ph.eta(arm, W))) ** (1.0 / alpha)
    if spec.kind == "ph":
        return e / np.exp(spec.censor_linear.log_rate(arm, W))
    return e / np.exp(spec.warp.censor_log_rate(arm, W))


def sample_dataset(spec: DgmSpec, n: int, rng=None, return_latents: bool = False):
    """One observational dataset: W, A ~ pi(W), U = min(T, C, cap), Delta."""
    rng = _as_rng(spec.seed if rng is None else rng)
    W = sample_covariates(n, rng)
    A = (rng.random(n) < propensity_true(W)).astype(int)
    T = np.empty(n)
    C = np.empty(n)
    for arm in (0, 1):
        mask = A == arm
        if mask.any():
            T[mask] = event_times_given(spec, arm, W[mask], rng)
            C[mask] = censoring_times_given(spec, arm, W[mask], rng)
    c_total = np.minimum(C, spec.admin_cap)
    delta = (T <= c_total).astype(int)
    u = np.minimum(T, c_total)
    data = Dataset(W, A, u, delta)
    if return_latents:
        return data, {"T": T, "C": C}
    return data


def sample_ph(n: int, spec: DgmSpec, variant: str = "linear-censoring", rng=None):
    """Weibull proportional-hazards mechanism with the chosen censoring."""
    kind = {"linear-censoring": "ph", "complex-censoring": "ph-complex"}[variant]
    return sample_dataset(replace(spec, kind=kind), n, rng)


def sample_warp(n: int, spec: DgmSpec, kind: str = "non-ph", rng=None):
    """Time-warp mechanism (non-proportional or crossing hazards)."""
    if kind not in ("non-ph", "cross-a"):
        raise DomainError(f"unknown warp kind {kind!r}")
    return sample_dataset(replace(spec, kind=kind), n, rng)


# ---------------------------------------------------------------------------
# closed-form conditional laws (oracle nuisances and truth)

def conditional_event_survival(spec: DgmSpec, t, arm: int, W) -> np.ndarray:
    """S(t | a, w) as an (n, len(t)) matrix from the closed-form law."""
    W = np.atleast_2d(np.asarray(W, float))
    t = np.atleast_1d(np.asarray(t, float))
    if spec.kind in ("ph", "ph-complex"):
        alpha = spec.event.alpha
        lam = np.outer(np.exp(spec.event.eta(arm, W)),
                       np.maximum(t, 0.0) ** alpha / alpha)
        return np.exp(-lam)
    lam0 = spec.warp.base_rate(W)
    if arm == 0:
        return np.exp(-np.outer(lam0, np.maximum(t, 0.0)))
    phi = warp_phi(spec, np.broadcast_to(np.maximum(t, 0.0), (W.shape[0], t.size)), W)
    return np.exp(-lam0[:, None] * phi)


def conditional_censor_survival(spec: DgmSpec, t, arm: int, W) -> np.ndarray:
    """P(C >= t | a, w) for the latent censoring law."""
    W = np.atleast_2d(np.asarray(W, float))
    t = np.atleast_1d(np.asarray(t, float))
    tpos = np.maximum(t, 0.0)
    if spec.kind == "ph-complex":
        alpha = spec.censor_ph.alpha
        lam = np.outer(np.exp(spec.censor_ph.eta(arm, W)), tpos**alpha / alpha)
        return np.exp(-lam)
    if spec.kind == "ph":
        rate = np.exp(spec.censor_linear.log_rate(arm, W))
    else:
        rate = np.exp(spec.warp.censor_log_rate(arm, W))
    return np.exp(-np.outer(rate, tpos))


@dataclass(frozen=True)
class OraclePropensity:
    """Exact treatment mechanism, optionally shifted on the logit scale."""

    logit_shift: float = 0.0
    epsilon: float = 0.0

    def predict(self, W, a: int) -> np.ndarray:
        p1 = propensity_true(W)
        if self.logit_shift != 0.0:
            p1 = _expit(np.log(p1 / (1.0 - p1)) + self.logit_shift)
        if self.epsilon > 0.0:
            p1 = np.clip(p1, self.epsilon, 1.0 - self.epsilon)
        return p1 if a == 1 else 1.0 - p1


@dataclass(frozen=True)
class OracleEventModel(ConditionalSurvivalModel):
    spec: DgmSpec
    basis_step: float = 0.01
    floor: float = 0.0
    kind: str = "oracle-event"

    def survival(self, times, a, W, side="right"):
        return self._clip(conditional_event_survival(self.spec, times, int(a), W))

    def survival_at(self, t, a, W, side="right"):
        W = np.atleast_2d(np.asarray(W, float))
        t = np.broadcast_to(np.asarray(t, float), (W.shape[0],))
        out = np.empty(W.shape[0])
        # evaluate per unit at its own time without building an n x n matrix
        if self.spec.kind in ("ph", "ph-complex"):
            alpha = self.spec.event.alpha
            out = np.exp(-np.exp(self.spec.event.eta(a, W))
                         * np.maximum(t, 0.0) ** alpha / alpha)
        else:
            lam0 = self.spec.warp.base_rate(W)
            if int(a) == 0:
                out = np.exp(-lam0 * np.maximum(t, 0.0))
            else:
                out = np.exp(-lam0 * warp_phi(self.spec, np.maximum(t, 0.0), W))
        return self._clip(out)

    def hazard_basis(self, t_max):
        n = max(int(np.ceil(t_max / self.basis_step)), 1)
        return np.linspace(t_max / n, t_max, n)


@dataclass(frozen=True)
class OracleCensorModel(ConditionalSurvivalModel):
    spec: DgmSpec
    basis_step: float = 0.01
    floor: float = 0.0
    kind: str = "oracle-censor"

    def survival(self, times, a, W, side="right"):
        return self._clip(conditional_censor_survival(self.spec, times, int(a), W))

    def survival_at(self, t, a, W, side="right"):
        W = np.atleast_2d(np.asarray(W, float))
        t = np.broadcast_to(np.asarray(t, float), (W.shape[0],))
        tpos = np.maximum(t, 0.0)
        if self.spec.kind == "ph-complex":
            alpha = self.spec.censor_ph.alpha
            return self._clip(np.exp(-np.exp(self.spec.censor_ph.eta(a, W))
                                     * tpos**alpha / alpha))
        if self.spec.kind == "ph":
            rate = np.exp(self.spec.censor_linear.log_rate(a, W))
        else:
            rate = np.exp(self.spec.warp.censor_log_rate(a, W))
        return self._clip(np.exp(-rate * tpos))

    def hazard_basis(self, t_max):
        n = max(int(np.ceil(t_max / self.basis_step)), 1)
        return np.linspace(t_max / n, t_max, n)


def oracle_nuisances(spec: DgmSpec, event_spec: DgmSpec | None = None,
                     censor_spec: DgmSpec | None = None,
                     propensity_logit_shift: float = 0.0,
                     epsilon: float = 0.0) -> NuisanceTriple:
    """Closed-form nuisances satisfying the fitted-model interface.

    Passing an alternative ``event_spec``/``censor_spec`` or a propensity
    logit shift yields deliberately misspecified components for robustness
    experiments.
    """
    return NuisanceTriple(
        propensity=OraclePropensity(logit_shift=propensity_logit_shift, epsilon=epsilon),
        event=OracleEventModel(spec=event_spec or spec),
        censor=OracleCensorModel(spec=censor_spec or spec),
        fold_id=-1,
        train_fingerprint="oracle",
    )


# ---------------------------------------------------------------------------
# truth by Monte Carlo marginalization of the closed-form conditionals

@dataclass(frozen=True)
class TruthRecord:
    tau: float
    eta0: float
    eta1: float
    theta: float
    se_eta0: float
    se_eta1: float
    se_theta: float
    n_oracle: int

    def __post_init__(self):
        if abs(self.theta - (np.log(self.eta1) - np.log(self.eta0))) > 1e-10:
            raise DomainError("theta must equal log(eta1 / eta0)")


def truth_theta(spec: DgmSpec, tau: float, n_oracle: int = 2_000_000,
                seed: int = 0, grid_step: float = 0.005,
                n_batches: int = 20, block: int = 4000) -> TruthRecord:
    """Marginalize S(t|a,W) over a large covariate sample on a fine grid.

    Batch means provide the Monte Carlo standard errors; the grid
    discretization bound on person-time is <= grid_step.
    """
    rng = np.random.default_rng(seed)
    m = int(round(tau / grid_step))
    grid = np.linspace(tau / m, tau, m)
    per_batch = int(np.ceil(n_oracle / n_batches))
    batch_stats = np.empty((n_batches, 3))
    total = np.zeros((2, m))
    n_used = 0
    for b in range(n_batches):
        batch_sum = np.zeros((2, m))
        drawn = 0
        while drawn < per_batch:
            nb = min(block, per_batch - drawn)
            W = sample_covariates(nb, rng)
            for arm in (0, 1):
                batch_sum[arm] += conditional_event_survival(spec, grid, arm, W).sum(axis=0)
            drawn += nb
        total += batch_sum
        n_used += drawn
        etas = []
        for arm in (0, 1):
            curve = StepSurvivalCurve(grid, np.clip(batch_sum[arm] / drawn, 0.0, 1.0))
            etas.append(average_hazard(curve, tau).ah)
        batch_stats[b] = (etas[0], etas[1], np.log(etas[1] / etas[0]))
    etas = []
    for arm in (0, 1):
        curve = StepSurvivalCurve(grid, np.clip(total[arm] / n_used, 0.0, 1.0))
        etas.append(average_hazard(curve, tau).ah)
    theta = log_ah_ratio(etas[1], etas[0])
    ses = batch_stats.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return TruthRecord(tau=float(tau), eta0=float(etas[0]), eta1=float(etas[1]),
                       theta=float(theta), se_eta0=float(ses[0]),
                       se_eta1=float(ses[1]), se_theta=float(ses[2]),
                       n_oracle=n_used)
