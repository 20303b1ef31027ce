"""Metrics and diagnostics: MISE, factual MSE, per-dose error profiles, distribution checks, aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats

from .core import CovariateMatrix, InterventionSpace, ScenarioDataset

KS_C01 = 1.628  # asymptotic Kolmogorov-Smirnov critical constant at significance 0.01
SIGNIFICANCE = 0.01


class MetricError(ValueError):
    """A metric could not be computed (e.g. the model predicted NaN)."""


@dataclass(frozen=True, eq=False)
class DoseGrid:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("dose grid needs at least two points")
        if np.any(np.diff(p) <= 0):
            raise ValueError("dose grid must be strictly increasing")
        if p[0] < 0 or p[-1] > 1:
            raise ValueError("dose grid must lie in [0, 1]")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, count: int = 65) -> "DoseGrid":
        return cls(np.linspace(0.0, 1.0, count))

    def __len__(self) -> int:
        return len(self.points)


def _grid(grid) -> np.ndarray:
    if grid is None:
        return DoseGrid.uniform().points
    if isinstance(grid, int):
        return DoseGrid.uniform(grid).points
    return grid.points if isinstance(grid, DoseGrid) else DoseGrid(grid).points


def _k(space) -> int:
    return space.k if isinstance(space, InterventionSpace) else int(space)


def _values(X) -> np.ndarray:
    return X.values if isinstance(X, CovariateMatrix) else np.atleast_2d(np.asarray(X, dtype=float))


def predict_grid(model, X, k: int, grid) -> np.ndarray:
    """Model predictions on the dose grid, shape ``(n, k, G)``."""
    x = _values(X)
    g = _grid(grid)
    n, G = len(x), len(g)
    xx = np.repeat(x, G, axis=0)
    dd = np.tile(g, n)
    out = np.empty((n, k, G))
    for t in range(k):
        out[:, t, :] = np.asarray(model.predict(xx, t, dd), dtype=float).reshape(n, G)
    return out


def squared_error_grid(model, response, X, space, grid=None) -> np.ndarray:
    """Squared CADR error on the grid, shape ``(n, k, G)``."""
    k = _k(space)
    g = _grid(grid)
    x = _values(X)
    if len(x) == 0:
        raise MetricError("empty test set")
    pred = predict_grid(model, x, k, g)
    if not np.all(np.isfinite(pred)):
        raise MetricError(f"model produced {int((~np.isfinite(pred)).sum())} non-finite predictions")
    return (response.on_grid(x, g) - pred) ** 2


def mise(model, response, X_test, space, grid=None) -> float:
    """Mean integrated squared error, integral over doses by the trapezoid rule.

    Averaged over test units and interventions; uses the noiseless surface.
    """
    g = _grid(grid)
    err = squared_error_grid(model, response, X_test, space, g)
    return float(np.trapezoid(err, g, axis=2).mean())


def factual_mse(model, ds: ScenarioDataset, which: str = "test") -> float:
    x, t, d, y = ds.part(which)
    if len(y) == 0:
        raise MetricError(f"split {which!r} is empty")
    pred = np.asarray(model.predict(x, t, d), dtype=float)
    return float(np.mean((y - pred) ** 2))


@dataclass
class MetricBundle:
    mise: float = math.nan
    factual_mse: float = math.nan
    fit_seconds: float = math.nan
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


# --- per-dose error profile ------------------------------------------------

@dataclass
class DoseErrorProfile:
    edges: np.ndarray
    errors: np.ndarray  # (k, B) mean squared CADR error on test units
    train_counts: np.ndarray  # (k, B) training-dose histogram per intervention

    @property
    def bins(self) -> int:
        return len(self.edges) - 1

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "errors": self.errors.tolist(),
            "train_counts": self.train_counts.astype(int).tolist(),
        }


def dose_bin(d, bins: int) -> np.ndarray:
    """Equal-width bin index of each dose; d = 1 falls in the last bin."""
    return np.clip(np.floor(np.asarray(d, dtype=float) * bins).astype(np.int64), 0, bins - 1)


def dose_error_profile(model, response, ds: ScenarioDataset, bins: int = 10, grid=None) -> DoseErrorProfile:
    if bins < 2:
        raise ValueError("need at least two bins")
    g = _grid(grid)
    k = ds.space.k
    x_test = ds.part("test")[0]
    err = squared_error_grid(model, response, x_test, k, g).mean(axis=0)  # (k, G)
    gb = dose_bin(g, bins)
    errors = np.full((k, bins), np.nan)
    for b in range(bins):
        inside = gb == b
        if inside.any():
            errors[:, b] = err[:, inside].mean(axis=1)
    _, t_tr, d_tr, _ = ds.part("train")
    counts = np.zeros((k, bins))
    np.add.at(counts, (t_tr, dose_bin(d_tr, bins)), 1)
    return DoseErrorProfile(np.linspace(0.0, 1.0, bins + 1), errors, counts)


# --- distribution diagnostics ---------------------------------------------

@dataclass(frozen=True)
class UniformityResult:
    kind: str  # "dose" or "label"
    statistic: float
    threshold: float
    passed: bool
    n: int


def ks_threshold(n: int) -> float:
    return KS_C01 / math.sqrt(n)


def uniformity_diagnostic(values, k: int | None = None) -> UniformityResult:
    """KS test vs Uniform[0, 1] for doses, or chi-square vs uniform for labels (pass ``k``)."""
    v = np.asarray(values)
    if v.size == 0:
        raise ValueError("no values to test")
    n = int(v.size)
    if k is None:
        stat = float(stats.kstest(v.astype(float), "uniform").statistic)
        thr = ks_threshold(n)
        return UniformityResult("dose", stat, thr, stat < thr, n)
    counts = np.bincount(v.astype(np.int64), minlength=k)[:k]
    if k == 1:
        return UniformityResult("label", 0.0, 0.0, True, n)
    stat = float(stats.chisquare(counts).statistic)
    thr = float(stats.chi2.ppf(1 - SIGNIFICANCE, k - 1))
    return UniformityResult("label", stat, thr, stat <= thr, n)


def abs_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """|Pearson correlation|, defined as 0 when either side is constant."""
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        return 0.0
    return min(1.0, abs(float(a @ b)) / den)


@dataclass
class ConfoundingResult:
    columns: tuple[str, ...]
    dose_corr: np.ndarray
    label_gaps: np.ndarray | None
    threshold: float

    @property
    def flagged(self) -> list[str]:
        return [c for c, r in zip(self.columns, self.dose_corr) if r >= self.threshold]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "dose_corr": dict(zip(self.columns, self.dose_corr.tolist())),
            "label_gaps": None if self.label_gaps is None else dict(zip(self.columns, self.label_gaps.tolist())),
            "flagged": self.flagged,
        }


def confounding_diagnostic(ds: ScenarioDataset) -> ConfoundingResult:
    """Association of every covariate with the dose and (for k > 1) the intervention.

    The label gap of a column is the spread between its largest and smallest
    per-intervention mean.
    """
    x = ds.X.values
    n = len(x)
    corr = np.array([abs_correlation(x[:, j], ds.d) for j in range(x.shape[1])])
    gaps = None
    if ds.space.k > 1:
        means = [x[ds.t == t].mean(axis=0) for t in range(ds.space.k) if np.any(ds.t == t)]
        gaps = np.ptp(np.array(means), axis=0) if len(means) > 1 else np.zeros(x.shape[1])
    return ConfoundingResult(ds.X.names, corr, gaps, 4.0 / math.sqrt(n))


# --- aggregation -------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    done: int
    failed: int
    note: str = ""

    @property
    def count(self) -> int:
        return self.done + self.failed


def summarize(values: Iterable[float], failed: int = 0) -> Aggregate:
    """Mean and sample standard deviation (ddof 1; 0 for a single value).

    Sums are exact (``math.fsum``) so the result does not depend on order.
    """
    vals = [float(v) for v in values]
    if not vals:
        return Aggregate(math.nan, math.nan, 0, failed, "no completed runs")
    n = len(vals)
    mean = math.fsum(vals) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
    note = f"{n} of {n + failed} runs completed" if failed else ""
    return Aggregate(mean, std, n, failed, note)


def aggregate(cells: Iterable[Mapping], metric: str = "mise") -> dict[tuple[str, str], Aggregate]:
    """Group cell records by (estimator, scenario) and summarize ``metric``.

    Each record needs ``estimator``, ``scenario``, ``status`` and the metric;
    cells whose status is not ``done`` are counted as failed.
    """
    groups: dict[tuple[str, str], tuple[list, list]] = {}
    for cell in cells:
        key = (str(cell["estimator"]), str(cell["scenario"]))
        done, failed = groups.setdefault(key, ([], []))
        value = cell.get(metric)
        if cell["status"] == "done" and value is not None and math.isfinite(value):
            done.append(value)
        else:
            failed.append(cell)
    return {key: summarize(done, len(failed)) for key, (done, failed) in groups.items()}


__all__ = [
    "Aggregate", "ConfoundingResult", "DoseErrorProfile", "DoseGrid", "MetricBundle", "MetricError",
    "UniformityResult", "abs_correlation", "aggregate", "confounding_diagnostic", "dose_bin",
    "dose_error_profile", "factual_mse", "ks_threshold", "mise", "predict_grid", "squared_error_grid",
    "summarize", "uniformity_diagnostic",
]
