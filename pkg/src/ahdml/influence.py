"""Efficient influence functions for marginal survival and the log average hazard.

For a unit O = (W, A, U, Delta) and arm a, the uncentered survival influence
value at time t is

    phi(t) = S(t|a,W) * { 1 - 1{A=a}/pi(a|W) * [ 1{U<=t, Delta=1} / (S(U)G(U))
                                                 - int_0^{t^U} dL(u) / (S(u)G(u)) ] }

with S the conditional event survival, G(u) = P(C >= u | a, W) and dL the
jump measure of the conditional cumulative hazard.  Everything is evaluated
on a shared knot set: the caller's grid, the event model's hazard-jump
support, the units' own event times and tau.  On that set the compensator
integral is a finite sum over jumps, all time integrals are exact step
integrals, and the direct and weight-expanded forms of the log-AH influence
value agree algebraically (to float roundoff).

Conventions: S is evaluated right-continuously at a jump, G as a left limit
(P(C >= u)); increments dL are product-limit ratios of consecutive S values,
so step models contribute their exact jumps and smooth models a fine
discretization with an O(step) documented error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import StepSurvivalCurve, average_hazard
from .data import Dataset, ObservedUnit
from .errors import InvalidPerturbationError
from .nuisance import NuisanceTriple

__all__ = [
    "SurvivalEifRow",
    "ThetaEifRow",
    "EifAggregates",
    "DriftEstimate",
    "eif_aggregates",
    "survival_eif",
    "survival_eif_rows",
    "theta_eif",
    "theta_eif_values",
    "theta_eif_expanded",
    "hadamard_derivative_check",
    "drift_bias",
    "write_eif_csv",
]


@dataclass(frozen=True)
class SurvivalEifRow:
    """Per-unit survival influence values on the evaluation grid (uncentered)."""

    unit_id: int
    arm: int
    grid: np.ndarray
    phi: np.ndarray
    plugin: np.ndarray


@dataclass(frozen=True)
class ThetaEifRow:
    """Per-unit influence value for the arm-specific log average hazard."""

    unit_id: int
    arm: int
    value: float


@dataclass(frozen=True)
class EifAggregates:
    """Streaming reductions of the per-unit influence matrix.

    ``mean_phi`` is the raw (unprojected) one-step survival path on ``knots``;
    ``phi_tau`` / ``int_phi`` are the per-unit ingredients of the log-AH
    influence values.
    """

    knots: np.ndarray
    mean_phi: np.ndarray
    mean_plugin: np.ndarray
    phi_tau: np.ndarray
    int_phi: np.ndarray
    plugin_tau: np.ndarray
    int_plugin: np.ndarray


def _knot_set(data: Dataset, arm, nuis: NuisanceTriple, grid, tau: float) -> np.ndarray:
    grid = np.asarray(grid, float)
    pieces = [grid[(grid > 0) & (grid <= tau)], np.asarray([tau])]
    basis = np.asarray(nuis.event.hazard_basis(tau), float)
    pieces.append(basis[basis > 0])
    ev_u = data.u[(data.delta == 1) & (data.u > 0) & (data.u <= tau)]
    pieces.append(np.asarray(ev_u, float))
    return np.unique(np.concatenate(pieces))


def _step_widths(knots: np.ndarray):
    """Widths for exact step integration on [0, knots[-1]].

    The first return is the width of the origin segment [0, knots[0]);
    the second the widths attached to each knot value (last knot gets 0).
    """
    return float(knots[0]), np.concatenate([np.diff(knots), [0.0]])


def eif_aggregates(data: Dataset, arm: int, nuis: NuisanceTriple, grid, tau: float,
                   block_size: int = 1024) -> EifAggregates:
    """Evaluate the survival influence values for every unit, blockwise.

    Memory is bounded by ``block_size`` x #knots; per-unit full rows are not
    retained, only the reductions needed downstream.
    """
    knots = _knot_set(data, arm, nuis, grid, tau)
    K = knots.size
    origin_w, widths = _step_widths(knots)
    n = data.n
    sum_phi = np.zeros(K)
    sum_plugin = np.zeros(K)
    phi_tau = np.empty(n)
    int_phi = np.empty(n)
    plugin_tau = np.empty(n)
    int_plugin = np.empty(n)
    k_t = np.arange(1, K + 1)

    for lo in range(0, n, block_size):
        sl = slice(lo, min(lo + block_size, n))
        W, A, U, D = data.w[sl], data.a[sl], data.u[sl], data.delta[sl]
        m = len(U)
        pi = nuis.propensity.predict(W, arm)
        S = nuis.event.survival(knots, arm, W)                     # (m, K)
        G = nuis.censor.survival(knots, arm, W, side="left")       # P(C >= u)
        S_prev = np.concatenate([np.ones((m, 1)), S[:, :-1]], axis=1)
        dL = (S_prev - S) / S_prev
        integrand = dL / (S * G)
        cum = np.concatenate([np.zeros((m, 1)), np.cumsum(integrand, axis=1)], axis=1)
        k_u = np.searchsorted(knots, U, side="right")              # knots <= U_i
        comp = cum[np.arange(m)[:, None], np.minimum(k_u[:, None], k_t[None, :])]
        s_at_u = nuis.event.survival_at(U, arm, W)
        g_at_u = nuis.censor.survival_at(U, arm, W, side="left")
        ev_w = np.where(D == 1, 1.0 / (s_at_u * g_at_u), 0.0)
        ev_term = ev_w[:, None] * (U[:, None] <= knots[None, :])
        kappa = (A == arm) / pi
        phi = S * (1.0 - kappa[:, None] * (ev_term - comp))

        sum_phi += phi.sum(axis=0)
        sum_plugin += S.sum(axis=0)
        phi_tau[sl] = phi[:, -1]
        plugin_tau[sl] = S[:, -1]
        int_phi[sl] = origin_w + phi @ widths
        int_plugin[sl] = origin_w + S @ widths

    return EifAggregates(knots=knots, mean_phi=sum_phi / n, mean_plugin=sum_plugin / n,
                         phi_tau=phi_tau, int_phi=int_phi,
                         plugin_tau=plugin_tau, int_plugin=int_plugin)


def survival_eif_rows(data: Dataset, arm: int, nuis: NuisanceTriple, grid,
                      tau: float) -> list[SurvivalEifRow]:
    """Materialized per-unit rows; prefer :func:`eif_aggregates` for large n."""
    knots = _knot_set(data, arm, nuis, grid, tau)
    rows = []
    for i in range(data.n):
        one = data.subset(np.asarray([i]))
        agg = eif_aggregates(one, arm, nuis, knots, tau)
        # a single-unit aggregate's mean path is that unit's own phi
        rows.append(SurvivalEifRow(unit_id=i, arm=arm, grid=agg.knots,
                                   phi=agg.mean_phi, plugin=agg.mean_plugin))
    return rows


def survival_eif(unit: ObservedUnit, arm: int, nuis: NuisanceTriple, grid,
                 tau: float) -> SurvivalEifRow:
    data = Dataset(unit.w[None, :], [unit.a], [unit.u], [unit.delta])
    return survival_eif_rows(data, arm, nuis, grid, tau)[0]


# ---------------------------------------------------------------------------
# log-AH influence values

def _marginal_on(marginal: StepSurvivalCurve, knots: np.ndarray) -> np.ndarray:
    return np.asarray(marginal(knots), float)


def theta_eif_values(phi_tau: np.ndarray, int_phi: np.ndarray,
                     f_tau: float, r_tau: float) -> np.ndarray:
    """Map per-unit survival EIF ingredients to log-AH influence values.

    Centering uses the raw one-step path (the mean of phi, whose value at tau
    and time integral are exactly the means of the inputs); the scaling
    constants come from the caller's reported cumulative incidence and
    person-time.
    """
    phi_tau_c = phi_tau - phi_tau.mean()
    int_phi_c = int_phi - int_phi.mean()
    return -phi_tau_c / f_tau - int_phi_c / r_tau


def theta_eif(row: SurvivalEifRow, summary, marginal: StepSurvivalCurve) -> ThetaEifRow:
    """Direct evaluation: the linear image of the centered survival EIF."""
    knots = row.grid
    phi_star = row.phi - _marginal_on(marginal, knots)
    origin_w, widths = _step_widths(knots)
    integral = float(phi_star @ widths)            # centered origin segment is 0
    value = -phi_star[-1] / summary.cuminc - integral / summary.rmst
    return ThetaEifRow(unit_id=row.unit_id, arm=row.arm, value=float(value))


def theta_eif_expanded(unit: ObservedUnit, arm: int, nuis: NuisanceTriple, summary,
                       marginal: StepSurvivalCurve, grid) -> ThetaEifRow:
    """Algebraically identical alternative path via the time-dependent weight.

    The martingale part is re-expressed as a weighted sum over the jump set,
    with weight  S(tau|a,W)/F(tau) + (R0(tau|a,W) - R0(u|a,W))/R(tau); used
    as a cross-check and to expose the weight profile.
    """
    tau = float(summary.tau)
    data = Dataset(unit.w[None, :], [unit.a], [unit.u], [unit.delta])
    knots = _knot_set(data, arm, nuis, grid, tau)
    K = knots.size
    origin_w, widths = _step_widths(knots)
    W = unit.w[None, :]
    S = nuis.event.survival(knots, arm, W)[0]
    G = nuis.censor.survival(knots, arm, W, side="left")[0]
    m_vals = _marginal_on(marginal, knots)

    # centered outcome-regression terms
    int_S = origin_w + float(S @ widths)
    int_m = origin_w + float(m_vals @ widths)
    or_terms = -(S[-1] - m_vals[-1]) / summary.cuminc - (int_S - int_m) / summary.rmst

    if unit.a != arm:
        return ThetaEifRow(unit_id=0, arm=arm, value=float(or_terms))

    # jump increments of the bracket on the knot set
    S_prev = np.concatenate([[1.0], S[:-1]])
    dL = (S_prev - S) / S_prev
    s_at_u = float(nuis.event.survival_at(np.asarray([unit.u]), arm, W)[0])
    g_at_u = float(nuis.censor.survival_at(np.asarray([unit.u]), arm, W, side="left")[0])
    delta_b = -np.where(knots <= unit.u, dL / (S * G), 0.0)
    if unit.delta == 1 and unit.u <= tau:
        j = int(np.searchsorted(knots, unit.u))
        if j < K and knots[j] == unit.u:
            delta_b[j] += 1.0 / (s_at_u * g_at_u)

    # person-time weight profile u -> w(u)
    r0 = origin_w + np.concatenate([[0.0], np.cumsum(S[:-1] * widths[:-1])])
    weight = S[-1] / summary.cuminc + (r0[-1] - r0) / summary.rmst
    pi = float(nuis.propensity.predict(W, arm)[0])
    value = or_terms + float(np.dot(weight, delta_b)) / pi
    return ThetaEifRow(unit_id=0, arm=arm, value=float(value))


# ---------------------------------------------------------------------------
# derivative and drift diagnostics (test oracles)

def _log_ah_of_curve(values: np.ndarray, knots: np.ndarray) -> float:
    curve = StepSurvivalCurve(knots, np.clip(values, 0.0, 1.0))
    s = average_hazard(curve, float(knots[-1]))
    return float(np.log(s.ah))


def hadamard_derivative_check(base_curve: StepSurvivalCurve, perturbation,
                              tau: float, eps: float = 1e-4):
    """Analytic directional derivative of the log-AH map vs central difference.

    ``perturbation`` is evaluated on the base curve's grid (callable or
    array).  Perturbed curves must stay within [0, 1].
    """
    knots = base_curve.times
    if knots.size == 0 or abs(knots[-1] - tau) > 1e-12:
        raise InvalidPerturbationError("base curve grid must end at tau")
    s = np.asarray(base_curve.values, float)
    h = np.asarray(perturbation(knots) if callable(perturbation) else perturbation, float)
    if h.shape != knots.shape:
        raise InvalidPerturbationError("perturbation shape must match the curve grid")
    for sign in (+1, -1):
        v = s + sign * eps * h
        if v.min() < 0.0 or v.max() > 1.0:
            raise InvalidPerturbationError("perturbed curve leaves [0, 1]")

    f_tau = 1.0 - s[-1]
    origin_w, widths = _step_widths(knots)
    r_tau = origin_w + float(s @ widths)
    int_h = float(h @ widths)                       # h is 0 below the first knot
    analytic = -h[-1] / f_tau - int_h / r_tau
    numeric = (_log_ah_of_curve(s + eps * h, knots)
               - _log_ah_of_curve(s - eps * h, knots)) / (2 * eps)
    return float(analytic), float(numeric)


@dataclass(frozen=True)
class DriftEstimate:
    value: float
    mc_se: float
    n_draws: int


def drift_bias(nuis_hat: NuisanceTriple, nuis_true: NuisanceTriple, W: np.ndarray,
               arm: int, t: float, u_step: float = 0.01) -> DriftEstimate:
    """Second-order bias of the uncorrected mean under estimated nuisances.

    Monte Carlo over the supplied covariate draws of

        S_hat(t|a,W) * int_0^t  S_0(u)/S_hat(u)
                       * ( pi_0 G_0(u) / (pi_hat G_hat(u)) - 1 )  d(L_hat - L_0)(u)

    which vanishes when the event model is correct (the signed measure is
    zero) or when both the propensity and censoring models are correct (the
    ratio factor is zero).
    """
    W = np.atleast_2d(np.asarray(W, float))
    n = W.shape[0]
    m = max(int(np.ceil(t / u_step)), 1)
    ugrid = np.linspace(t / m, t, m)

    s_hat_t = nuis_hat.event.survival(np.asarray([t]), arm, W)[:, 0]
    S0 = nuis_true.event.survival(ugrid, arm, W)
    Sh = nuis_hat.event.survival(ugrid, arm, W)
    G0 = nuis_true.censor.survival(ugrid, arm, W, side="left")
    Gh = nuis_hat.censor.survival(ugrid, arm, W, side="left")
    pi0 = nuis_true.propensity.predict(W, arm)[:, None]
    pih = nuis_hat.propensity.predict(W, arm)[:, None]

    dLh = -np.diff(np.concatenate([np.zeros((n, 1)), np.log(Sh)], axis=1), axis=1)
    dL0 = -np.diff(np.concatenate([np.zeros((n, 1)), np.log(S0)], axis=1), axis=1)
    ratio = (pi0 * G0) / (pih * Gh) - 1.0
    inner = np.sum((S0 / Sh) * ratio * (dLh - dL0), axis=1)
    draws = s_hat_t * inner
    return DriftEstimate(value=float(draws.mean()),
                         mc_se=float(draws.std(ddof=1) / np.sqrt(n)),
                         n_draws=n)


def write_eif_csv(path, unit_ids, arms, values) -> None:
    """Optional diagnostic dump: unit_id, arm, theta_eif."""
    with open(path, "w") as fh:
        fh.write("unit_id,arm,theta_eif\n")
        for uid, arm, val in zip(unit_ids, arms, values):
            fh.write(f"{int(uid)},{int(arm)},{repr(float(val))}\n")
