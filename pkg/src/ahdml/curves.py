"""Step-function survival curves and the average-hazard functional.

Curves are right-continuous step functions: a curve with jump times
``t_1 < ... < t_m`` and values ``v_1, ..., v_m`` equals ``origin_value`` on
``[0, t_1)`` and ``v_j`` on ``[t_j, t_{j+1})``.  All integrals are computed
exactly over the steps, so no quadrature error enters downstream ratios.

Tie convention for product-limit estimation: events are processed before
censorings at the same timestamp, i.e. a unit censored at ``t`` is still in
the risk set for events at ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import (
    DegenerateDataError,
    DegenerateEstimandError,
    DomainError,
    InvalidHorizonError,
)

__all__ = [
    "StepFunction",
    "StepSurvivalCurve",
    "StepCumulativeHazard",
    "AhSummary",
    "rmst",
    "average_hazard",
    "log_ah_ratio",
    "isotonic_project",
    "km_estimate",
    "nelson_aalen",
]


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on [0, inf) with a value at the origin."""

    times: np.ndarray
    values: np.ndarray
    origin_value: float = 1.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if times.size and (not np.all(np.isfinite(times)) or times[0] < 0):
            raise DomainError("times must be finite and >= 0")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DomainError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("values must be finite")

    def __call__(self, t, side: str = "right"):
        """Evaluate at ``t``; ``side='left'`` gives the left limit."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right" if side == "right" else "left")
        padded = np.concatenate(([self.origin_value], self.values))
        out = padded[idx]
        return out if out.ndim else float(out)

    def integral(self, upper: float) -> float:
        """Exact step integral over [0, upper]."""
        if upper <= 0:
            return 0.0
        knots = np.concatenate(([0.0], self.times, [np.inf]))
        vals = np.concatenate(([self.origin_value], self.values))
        widths = np.diff(np.minimum(knots, upper))
        return float(np.dot(vals, widths))


class StepSurvivalCurve(StepFunction):
    """Survival curve: values in [0, 1], equal to 1 before the first jump."""

    def __init__(self, times, values):
        super().__init__(np.asarray(times, float), np.asarray(values, float), 1.0)
        if self.values.size and (self.values.min() < -1e-12 or self.values.max() > 1 + 1e-12):
            raise DomainError("survival values must lie in [0, 1]")

    @classmethod
    def from_function(cls, fn, tau: float, step: float = 0.01) -> "StepSurvivalCurve":
        """Sample an analytic survival function onto a grid on [0, tau].

        The default 0.01-month resolution trades exactness for speed; pass a
        finer ``step`` when the downstream tolerance demands it.
        """
        if tau <= 0:
            raise InvalidHorizonError(f"tau must be > 0, got {tau}")
        n = int(round(tau / step))
        times = np.linspace(step, tau, n)
        return cls(times, np.asarray(fn(times), dtype=float))


class StepCumulativeHazard(StepFunction):
    """Cumulative hazard: non-decreasing, equal to 0 before the first jump."""

    def __init__(self, times, values):
        super().__init__(np.asarray(times, float), np.asarray(values, float), 0.0)
        if self.values.size and np.any(np.diff(np.concatenate(([0.0], self.values))) < -1e-12):
            raise DomainError("cumulative hazard must be non-decreasing")


@dataclass(frozen=True)
class AhSummary:
    """Cumulative incidence, restricted mean survival time and their ratio."""

    cuminc: float
    rmst: float
    ah: float
    tau: float

    def __post_init__(self):
        if not (0.0 <= self.cuminc <= 1.0):
            raise DomainError(f"cuminc must be in [0, 1], got {self.cuminc}")
        if self.rmst <= 0 or self.rmst > self.tau + 1e-9:
            raise DomainError("rmst must be in (0, tau]")
        if abs(self.ah * self.rmst - self.cuminc) > 1e-12 * max(1.0, self.cuminc):
            raise DomainError("ah must equal cuminc / rmst")

    @classmethod
    def from_incidence_and_persontime(cls, cuminc: float, rmst_value: float,
                                      tau: float) -> "AhSummary":
        """Build the summary from already-computed components."""
        if cuminc <= 0.0 or rmst_value <= 0.0:
            raise DegenerateEstimandError("cuminc and rmst must be positive")
        return cls(cuminc=cuminc, rmst=rmst_value, ah=cuminc / rmst_value, tau=tau)


def rmst(curve: StepSurvivalCurve, tau: float) -> float:
    """Restricted mean survival time: the exact step integral of S over [0, tau]."""
    if tau <= 0:
        raise InvalidHorizonError(f"tau must be > 0, got {tau}")
    return curve.integral(tau)


def average_hazard(curve: StepSurvivalCurve, tau: float) -> AhSummary:
    """Average hazard up to ``tau``: cumulative incidence over person-time.

    Raises :class:`DegenerateEstimandError` when no probability mass falls in
    [0, tau] (log-scale contrasts would be undefined) or when person-time is
    zero.
    """
    if tau <= 0:
        raise InvalidHorizonError(f"tau must be > 0, got {tau}")
    cuminc = 1.0 - float(curve(tau))
    r = rmst(curve, tau)
    if cuminc <= 0.0:
        raise DegenerateEstimandError(f"no cumulative incidence by tau={tau}")
    if r <= 0.0:
        raise DegenerateEstimandError(f"zero restricted mean survival time by tau={tau}")
    return AhSummary(cuminc=cuminc, rmst=r, ah=cuminc / r, tau=tau)


def log_ah_ratio(eta1: float, eta0: float) -> float:
    """Log ratio of two average hazards."""
    if eta1 <= 0 or eta0 <= 0:
        raise DomainError(f"average hazards must be positive, got ({eta1}, {eta0})")
    return float(np.log(eta1) - np.log(eta0))


def isotonic_project(values, direction: str = "non-increasing") -> np.ndarray:
    """L2 projection onto monotone sequences (pool-adjacent-violators).

    Idempotent and mean-preserving; empty input yields an empty output.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy()
    if direction == "non-increasing":
        return isotonic_regression(values, increasing=False).x.copy()
    if direction == "non-decreasing":
        return isotonic_regression(values, increasing=True).x.copy()
    raise DomainError(f"unknown direction {direction!r}")


def _risk_and_events(u, delta, weights):
    u = np.asarray(u, dtype=float)
    delta = np.asarray(delta)
    if u.size == 0 or np.max(u) <= 0:
        raise DegenerateDataError("need at least one unit with positive follow-up")
    weights = np.ones_like(u) if weights is None else np.asarray(weights, dtype=float)
    event_times = np.unique(u[delta == 1])
    if event_times.size == 0:
        return event_times, np.array([]), np.array([])
    # risk set at t includes every unit with u >= t (events-first tie rule)
    order = np.argsort(u)
    u_sorted, w_sorted = u[order], weights[order]
    total = weights.sum()
    cum_before = np.concatenate(([0.0], np.cumsum(w_sorted)))
    at_risk = total - cum_before[np.searchsorted(u_sorted, event_times, side="left")]
    d = np.array([weights[(u == t) & (delta == 1)].sum() for t in event_times])
    return event_times, d, at_risk


def km_estimate(u, delta, weights=None) -> StepSurvivalCurve:
    """Product-limit (Kaplan-Meier) survival curve, optionally weighted."""
    event_times, d, at_risk = _risk_and_events(u, delta, weights)
    if event_times.size == 0:
        return StepSurvivalCurve(np.array([]), np.array([]))
    surv = np.cumprod(1.0 - d / at_risk)
    return StepSurvivalCurve(event_times, np.clip(surv, 0.0, 1.0))


def nelson_aalen(u, delta) -> StepCumulativeHazard:
    """Nelson-Aalen cumulative hazard with increments d / n-at-risk."""
    event_times, d, at_risk = _risk_and_events(u, delta, None)
    if event_times.size == 0:
        return StepCumulativeHazard(np.array([]), np.array([]))
    return StepCumulativeHazard(event_times, np.cumsum(d / at_risk))
