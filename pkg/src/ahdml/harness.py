"""Monte Carlo grid runner: (mechanism x n x estimator x replicate) cells.

Each replicate draws one dataset per mechanism and applies every requested
estimator to it, recording point estimates, intervals and coverage flags for
the three targets (eta0, eta1, theta).  Replicates are the unit of
parallelism; every replicate derives its own RNG streams from the base seed
and its grid coordinates, so results are byte-identical across worker
counts.  Rows are checkpointed to an append-only JSON-lines log keyed by
(cell, replicate): interrupted runs resume by skipping completed keys.

Estimator failures never abort the grid; they become failure rows and are
excluded (with counts) from the summaries.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
import pandas as pd

from .errors import AhdmlError, DomainError
from .estimators import CrossFitPlan, ah_dml, cox_marginal, g_computation
from .nuisance import LearnerConfig
from .simulate import DgmSpec, TruthRecord, make_dgm, sample_dataset, truth_theta

__all__ = [
    "GridSpec",
    "CellSummary",
    "run_grid",
    "summarize",
    "emit_plotdata",
    "result_table",
    "RESULT_COLUMNS",
]

TARGETS = ("eta0", "eta1", "theta")

RESULT_COLUMNS = ["dgm", "n", "estimator", "replicate", "target",
                  "estimate", "se", "ci_low", "ci_high", "failed", "error"]


@dataclass(frozen=True)
class GridSpec:
    """The simulation grid; defaults are desk-scale, the full study profile
    (five sample sizes, 1000 replicates) is a documented long-running run."""

    dgms: tuple = ("non-ph", "ph")
    sample_sizes: tuple = (500, 1000)
    replicates: int = 200
    tau: float = 12.0
    estimators: tuple = ("ah-dml", "g-comp", "cox-marginal")
    base_seed: int = 1
    k_folds: int = 5
    bootstrap_reps: int = 200
    alpha: float = 0.05
    n_oracle: int = 2_000_000
    learner: LearnerConfig = field(default_factory=LearnerConfig)

    def dgm_spec(self, name: str) -> DgmSpec:
        return make_dgm(name)


def _replicate_seed(base: int, dgm_idx: int, n_idx: int, rep: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((base, dgm_idx, n_idx, rep, stream))


def _estimate_rows(grid: GridSpec, dgm_idx: int, n_idx: int, rep: int) -> list[dict]:
    dgm_name = grid.dgms[dgm_idx]
    n = grid.sample_sizes[n_idx]
    spec = grid.dgm_spec(dgm_name)
    data_rng = np.random.default_rng(_replicate_seed(grid.base_seed, dgm_idx, n_idx, rep, 0))
    data = sample_dataset(spec, n, data_rng)
    rows = []
    for est_idx, est in enumerate(grid.estimators):
        seed = int(_replicate_seed(grid.base_seed, dgm_idx, n_idx, rep, 1 + est_idx)
                   .generate_state(1)[0] % (2**31))
        base = {"dgm": dgm_name, "n": n, "estimator": est, "replicate": rep}
        try:
            if est == "ah-dml":
                fit = ah_dml(data, grid.tau, CrossFitPlan(grid.k_folds, seed),
                             grid.learner, grid.alpha)
            elif est == "g-comp":
                fit = g_computation(data, grid.tau, grid.learner,
                                    grid.bootstrap_reps, grid.alpha, seed)
            elif est == "cox-marginal":
                fit = cox_marginal(data, grid.tau, grid.bootstrap_reps, grid.alpha, seed)
            else:
                raise DomainError(f"unknown estimator {est!r}")
        except AhdmlError as exc:
            for target in TARGETS:
                rows.append({**base, "target": target, "estimate": None, "se": None,
                             "ci_low": None, "ci_high": None, "failed": True,
                             "error": type(exc).__name__})
            continue
        values = {"eta0": fit.summary0.ah, "eta1": fit.summary1.ah, "theta": fit.theta}
        for target in TARGETS:
            # intervals are reported for theta; arm rows carry the estimate only
            ci = (fit.ci_low, fit.ci_high) if target == "theta" else (None, None)
            rows.append({**base, "target": target, "estimate": float(values[target]),
                         "se": fit.se if target == "theta" else None,
                         "ci_low": ci[0], "ci_high": ci[1],
                         "failed": False, "error": ""})
    return rows


def _worker(args):
    grid, dgm_idx, n_idx, rep = args
    return _estimate_rows(grid, dgm_idx, n_idx, rep)


def _row_key(row: dict) -> tuple:
    return (row["dgm"], row["n"], row["estimator"], row["replicate"])


def run_grid(grid: GridSpec, workers: int = 1, checkpoint_path=None) -> pd.DataFrame:
    """Run the grid, optionally resuming from an existing checkpoint log."""
    done = set()
    existing = []
    if checkpoint_path and os.path.exists(checkpoint_path):
        with open(checkpoint_path) as fh:
            for line in fh:
                row = json.loads(line)
                existing.append(row)
                done.add(_row_key(row))
    tasks = [(grid, di, ni, rep)
             for di in range(len(grid.dgms))
             for ni in range(len(grid.sample_sizes))
             for rep in range(grid.replicates)
             if not all((grid.dgms[di], grid.sample_sizes[ni], est, rep) in done
                        for est in grid.estimators)]
    sink = open(checkpoint_path, "a") if checkpoint_path else None
    new_rows = []

    def consume(rows):
        for row in rows:
            if _row_key(row) in done:
                continue
            new_rows.append(row)
            if sink is not None:
                sink.write(json.dumps(row, sort_keys=True) + "\n")
        if sink is not None:
            sink.flush()

    if workers <= 1:
        for task in tasks:
            consume(_worker(task))
    else:
        ctx = get_context("spawn" if os.name == "nt" else "fork")
        with ctx.Pool(workers) as pool:
            for rows in pool.imap(_worker, tasks, chunksize=1):
                consume(rows)
    if sink is not None:
        sink.close()
    return result_table(existing + new_rows)


def result_table(rows) -> pd.DataFrame:
    """Canonical result table: fixed columns, deterministic row order."""
    df = pd.DataFrame(list(rows), columns=RESULT_COLUMNS)
    df = df.sort_values(["dgm", "n", "estimator", "replicate", "target"],
                        kind="stable").reset_index(drop=True)
    return df


@dataclass(frozen=True)
class CellSummary:
    """Aggregated performance of one estimator on one grid cell and target."""

    dgm: str
    n: int
    estimator: str
    target: str
    truth: float
    percent_bias: float
    bias_is_absolute: bool
    variance_x100: float
    mse_x100: float
    coverage: float | None
    replicates: int
    failures: int

    def __post_init__(self):
        if self.coverage is not None and not (0.0 <= self.coverage <= 1.0):
            raise DomainError("coverage must be in [0, 1]")
        # exact decomposition: mse = (m-1)/m * sample variance + bias^2
        m = self.replicates
        if m >= 2 and self.mse_x100 < (m - 1) / m * self.variance_x100 - 1e-9:
            raise DomainError("mse below its variance decomposition floor")


def summarize(rows, truths: dict) -> list[CellSummary]:
    """Aggregate result rows into per-cell summaries.

    ``truths`` maps dgm name to a :class:`TruthRecord` (or a dict of target
    values).  Percent bias switches to absolute bias, flagged, when the truth
    is zero.  Failed replicates are excluded and counted.
    """
    df = result_table(rows)
    out = []
    for (dgm, n, est, target), cell in df.groupby(["dgm", "n", "estimator", "target"],
                                                  sort=True):
        truth_rec = truths[dgm]
        if isinstance(truth_rec, TruthRecord):
            truth = {"eta0": truth_rec.eta0, "eta1": truth_rec.eta1,
                     "theta": truth_rec.theta}[target]
        else:
            truth = float(truth_rec[target])
        ok = cell[~cell["failed"].astype(bool)]
        failures = int(cell["failed"].astype(bool).sum())
        est_vals = ok["estimate"].astype(float).to_numpy()
        m = len(est_vals)
        if m == 0:
            continue
        mean_est = est_vals.mean()
        if truth == 0.0:
            pbias, absolute = float(mean_est - truth), True
        else:
            pbias, absolute = float(100.0 * (mean_est - truth) / abs(truth)), False
        variance = float(np.var(est_vals, ddof=1)) if m >= 2 else 0.0
        mse = float(np.mean((est_vals - truth) ** 2))
        has_ci = ok["ci_low"].notna() & ok["ci_high"].notna()
        if has_ci.any():
            cov_rows = ok[has_ci]
            covered = ((cov_rows["ci_low"].astype(float) <= truth)
                       & (truth <= cov_rows["ci_high"].astype(float)))
            coverage = float(covered.mean())
        else:
            coverage = None
        out.append(CellSummary(dgm=dgm, n=int(n), estimator=est, target=target,
                               truth=float(truth), percent_bias=pbias,
                               bias_is_absolute=absolute,
                               variance_x100=100.0 * variance, mse_x100=100.0 * mse,
                               coverage=coverage, replicates=m, failures=failures))
    return out


def summaries_frame(summaries) -> pd.DataFrame:
    return pd.DataFrame([s.__dict__ for s in summaries])


def emit_plotdata(summaries, layout: str = "ratio-grid") -> pd.DataFrame:
    """Long-format (dgm, n, estimator, metric, value) table behind the
    standard four-panel summary figures."""
    if layout == "ratio-grid":
        keep = [s for s in summaries if s.target == "theta"]
    elif layout == "arm-grid":
        keep = [s for s in summaries if s.target in ("eta0", "eta1")]
    else:
        raise DomainError(f"unknown layout {layout!r}")
    rows = []
    for s in keep:
        label = s.estimator if layout == "ratio-grid" else f"{s.estimator}:{s.target}"
        for metric, value in (("percent_bias", s.percent_bias),
                              ("variance_x100", s.variance_x100),
                              ("mse_x100", s.mse_x100),
                              ("coverage", s.coverage)):
            rows.append({"dgm": s.dgm, "n": s.n, "estimator": label,
                         "metric": metric, "value": value})
    return pd.DataFrame(rows, columns=["dgm", "n", "estimator", "metric", "value"])


def compute_truths(grid: GridSpec, cache: dict | None = None) -> dict:
    """TruthRecord per mechanism name at the grid's tau."""
    out = dict(cache or {})
    for name in grid.dgms:
        if name not in out:
            out[name] = truth_theta(grid.dgm_spec(name), grid.tau,
                                    n_oracle=grid.n_oracle)
    return out
