"""Observed-data containers and the CSV wire format.

The on-disk schema is a headed CSV with columns ``w_1 .. w_d, a, u, delta``;
missing values are rejected with the offending line number.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DomainError

__all__ = ["ObservedUnit", "Dataset", "read_dataset_csv", "write_dataset_csv"]


@dataclass(frozen=True)
class ObservedUnit:
    """One subject: covariates, treatment, follow-up time, event flag."""

    w: np.ndarray
    a: int
    u: float
    delta: int

    def counting(self, t: float) -> int:
        """N(t) = 1{U <= t, Delta = 1}."""
        return int(self.u <= t and self.delta == 1)

    def at_risk(self, t: float) -> int:
        """Y(t) = 1{U >= t}."""
        return int(self.u >= t)


@dataclass(frozen=True)
class Dataset:
    """Column-oriented dataset of observed units."""

    w: np.ndarray          # (n, d) covariates
    a: np.ndarray          # (n,)  treatment in {0, 1}
    u: np.ndarray          # (n,)  follow-up time >= 0
    delta: np.ndarray      # (n,)  event indicator in {0, 1}

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        a = np.asarray(self.a, dtype=int)
        u = np.asarray(self.u, dtype=float)
        delta = np.asarray(self.delta, dtype=int)
        for name, arr in (("w", w), ("a", a), ("u", u), ("delta", delta)):
            object.__setattr__(self, name, arr)
        n = w.shape[0]
        if not (a.shape == u.shape == delta.shape == (n,)):
            raise DomainError("column lengths disagree")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(u)):
            raise DomainError("covariates and follow-up times must be finite")
        if np.any(u < 0):
            raise DomainError("follow-up times must be >= 0")
        if not np.all(np.isin(a, (0, 1))) or not np.all(np.isin(delta, (0, 1))):
            raise DomainError("a and delta must be 0/1")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def unit(self, i: int) -> ObservedUnit:
        return ObservedUnit(self.w[i], int(self.a[i]), float(self.u[i]), int(self.delta[i]))

    def subset(self, idx) -> "Dataset":
        return Dataset(self.w[idx], self.a[idx], self.u[idx], self.delta[idx])

    def truncate(self, horizon: float) -> "Dataset":
        """Administratively censor follow-up at ``horizon``.

        Events at exactly the horizon are kept (events-first tie rule).
        """
        u = np.minimum(self.u, horizon)
        delta = np.where(self.u <= horizon, self.delta, 0)
        return Dataset(self.w, self.a, u, delta)

    def event_times(self, tau: float | None = None) -> np.ndarray:
        """Distinct observed event times, optionally restricted to (0, tau]."""
        t = np.unique(self.u[self.delta == 1])
        t = t[t > 0]
        return t if tau is None else t[t <= tau]


def read_dataset_csv(path) -> Dataset:
    """Parse the ``w_1..w_d, a, u, delta`` schema; reject malformed rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", line=1) from None
        header = [h.strip() for h in header]
        expected_tail = ["a", "u", "delta"]
        d = len(header) - 3
        want = [f"w_{j}" for j in range(1, d + 1)] + expected_tail
        if d < 1 or header != want:
            raise DataFormatError(
                f"header must be w_1..w_d,a,u,delta; got {','.join(header)}", line=1
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 3:
                raise DataFormatError(f"expected {d + 3} fields, got {len(row)}", line=lineno)
            try:
                vals = [float(x) for x in row]
            except ValueError:
                raise DataFormatError(f"non-numeric or missing value in row", line=lineno) from None
            if not all(np.isfinite(vals)):
                raise DataFormatError("non-finite value in row", line=lineno)
            rows.append(vals)
    if not rows:
        raise DataFormatError("no data rows", line=2)
    arr = np.asarray(rows, dtype=float)
    a, u, delta = arr[:, d], arr[:, d + 1], arr[:, d + 2]
    if not np.all(np.isin(a, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(a, (0.0, 1.0)))[0])
        raise DataFormatError("treatment column must be 0/1", line=bad + 2)
    if not np.all(np.isin(delta, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(delta, (0.0, 1.0)))[0])
        raise DataFormatError("delta column must be 0/1", line=bad + 2)
    return Dataset(arr[:, :d], a.astype(int), u, delta.astype(int))


def write_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"w_{j}" for j in range(1, dataset.d + 1)] + ["a", "u", "delta"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(x)) for x in dataset.w[i]]
                + [int(dataset.a[i]), repr(float(dataset.u[i])), int(dataset.delta[i])]
            )
