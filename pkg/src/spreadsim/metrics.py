"""Error functionals over estimate trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9


def deltas(estimates, x) -> tuple[float, float]:
    """Greatest overestimate and least underestimate, both clamped at zero."""
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(x, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    err = est - ref
    return max(0.0, float(err.max())), max(0.0, float(-err.min()))


@dataclass
class ErrorSeries:
    """Per-round ``delta_plus``, ``delta_minus`` and max absolute error.

    Usable directly as an engine observer.
    """

    x: np.ndarray
    delta_plus: list[float] = field(default_factory=list)
    delta_minus: list[float] = field(default_factory=list)
    max_abs: list[float] = field(default_factory=list)

    def __call__(self, state) -> None:
        self.append(state.estimates)

    def append(self, estimates) -> None:
        dp, dm = deltas(estimates, self.x)
        self.delta_plus.append(dp)
        self.delta_minus.append(dm)
        self.max_abs.append(max(dp, dm))


def _settle_round(values: Sequence[float], tol: float) -> int | None:
    """First index from which every value stays within ``tol``."""
    arr = np.asarray(values, dtype=float)
    bad = np.flatnonzero(arr > tol)
    if bad.size == 0:
        return 0
    last = int(bad[-1])
    return last + 1 if last + 1 < len(arr) else None


def convergence_round(series: ErrorSeries, tol: float = DEFAULT_TOL) -> int | None:
    """First round after which both functionals stay within ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return _settle_round(np.maximum(series.delta_plus, series.delta_minus), tol)


def component_convergence_round(values: Sequence[float], tol: float = DEFAULT_TOL) -> int | None:
    return _settle_round(values, tol)


def time_below(values: Sequence[float], bound: float, sustained: bool = False) -> int | None:
    """First round at which ``values`` is at most ``bound``.

    With ``sustained`` the value must also stay at or below ``bound`` for the
    rest of the recorded horizon.
    """
    if bound < 0:
        raise ValueError("bound must be nonnegative")
    arr = np.asarray(values, dtype=float)
    if sustained:
        return _settle_round(arr, bound)
    hits = np.flatnonzero(arr <= bound)
    return int(hits[0]) if hits.size else None


@dataclass
class Envelope:
    mean: np.ndarray
    low: np.ndarray
    high: np.ndarray


def envelope(series: Sequence[Sequence[float]]) -> Envelope:
    """Mean and min/max across trials; shorter series are padded with their last value."""
    length = max(len(s) for s in series)
    mat = np.array([list(s) + [s[-1]] * (length - len(s)) for s in series], dtype=float)
    return Envelope(mat.mean(axis=0), mat.min(axis=0), mat.max(axis=0))


def write_envelope_csv(path, plus: Envelope, minus: Envelope) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "delta_plus_mean", "delta_plus_min", "delta_plus_max",
                    "delta_minus_mean", "delta_minus_min", "delta_minus_max"])
        for t in range(len(plus.mean)):
            w.writerow([t] + [repr(float(v)) for v in (plus.mean[t], plus.low[t], plus.high[t],
                                                       minus.mean[t], minus.low[t], minus.high[t])])
