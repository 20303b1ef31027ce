"""Response surfaces mu(t, d, x).

Every surface evaluates vectorised: ``surface(t, d, x)`` takes aligned
intervention indices, doses and raw covariate rows and returns one value per
row. Scalars broadcast against the rows of ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import CovariateMatrix, SeedTree, as_seed

SCORE_GRID = np.linspace(0.0, 1.0, 9)
MODE_GRID = np.linspace(0.0, 1.0, 65)


def _rows(x) -> np.ndarray:
    x = x.values if isinstance(x, CovariateMatrix) else np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


class ResponseSurface:
    """Base class; subclasses implement ``_evaluate`` on aligned arrays."""

    k: int = 1

    def __call__(self, t, d, x) -> np.ndarray:
        x = _rows(x)
        n = len(x)
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (n,))
        d = np.broadcast_to(np.asarray(d, dtype=float), (n,))
        return self._evaluate(t, d, x)

    def _evaluate(self, t: np.ndarray, d: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def on_grid(self, x, grid: np.ndarray) -> np.ndarray:
        """Values on a dose grid, shape ``(n, k, len(grid))``."""
        x = _rows(x)
        out = np.empty((len(x), self.k, len(grid)))
        for t in range(self.k):
            for j, g in enumerate(grid):
                out[:, t, j] = self(t, g, x)
        return out

    def best_response(self, x) -> np.ndarray:
        """Per unit and intervention, the best response over a 9-point dose grid."""
        return self.on_grid(x, SCORE_GRID).max(axis=2)

    def modal_dose(self, t, x) -> np.ndarray:
        """Dose maximizing mu(t_i, ., x_i) on a 65-point grid; ties go to the smaller dose."""
        x = _rows(x)
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (len(x),))
        vals = np.stack([self(t, g, x) for g in MODE_GRID], axis=1)
        return MODE_GRID[np.argmax(vals, axis=1)]


@dataclass(frozen=True, eq=False)
class FunctionSurface(ResponseSurface):
    """Wraps a vectorised callable ``fn(t, d, x)``."""

    fn: Callable
    k: int = 1

    def _evaluate(self, t, d, x):
        return np.asarray(self.fn(t, d, x), dtype=float) * np.ones(len(x))


# --- IHDP-3 -------------------------------------------------------------

class Archetype(enum.IntEnum):
    A1 = 1
    A2 = 2
    A3 = 3
    A4 = 4


_MODAL_DOSE = {Archetype.A1: 1 / 8, Archetype.A2: 3 / 8, Archetype.A3: 5 / 8, Archetype.A4: 7 / 8}


@dataclass(frozen=True, eq=False)
class ArchetypeAssignment:
    archetypes: np.ndarray
    columns: tuple[str, str]


def _archetype_of(a, b) -> np.ndarray:
    return (2 * np.asarray(a) + np.asarray(b)).astype(np.int64) + 1


def assign_archetypes(X: CovariateMatrix, col_a: str = "b.marr", col_b: str = "mom.lths") -> ArchetypeAssignment:
    """Map (col_a, col_b) = (0,0), (0,1), (1,0), (1,1) to A1..A4."""
    cols = []
    for name in (col_a, col_b):
        if name not in X.names:
            raise KeyError(f"archetype column {name!r} missing from covariates")
        col = X.column(name)
        if not np.all((col == 0) | (col == 1)):
            raise ValueError(f"archetype column {name!r} is not binary")
        cols.append(col)
    arch = _archetype_of(*cols)
    arch.flags.writeable = False
    return ArchetypeAssignment(arch, (col_a, col_b))


def ihdp3_modal_dose(archetype) -> float | np.ndarray:
    arch = np.asarray(archetype, dtype=np.int64)
    if np.any((arch < 1) | (arch > 4)):
        raise ValueError(f"invalid archetype {archetype!r}")
    table = np.array([np.nan, 1 / 8, 3 / 8, 5 / 8, 7 / 8])
    out = table[arch]
    return float(out) if out.ndim == 0 else out


def ihdp3_response(archetype, x, d) -> float | np.ndarray:
    """Dose-response curve of an IHDP-3 archetype.

    ``x`` holds the (already scaled) covariates x0..x4 in its first five
    entries/columns.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    n = len(x)
    arch = np.broadcast_to(np.asarray(archetype, dtype=np.int64), (n,))
    d = np.broadcast_to(np.asarray(d, dtype=float), (n,))
    x0, x1, x2, x3, x4 = (x[:, j] for j in range(5))
    curves = np.stack([
        10.0 * (x0 + 12.0 * d * (d - 0.75 * (x1 + x2)) ** 2),
        10.0 * (x1 + np.sin(np.pi * (x2 + x3) * d)),
        10.0 * (x2 + 12.0 * (x3 * d - x4 * d ** 2)),
        3.0 * x0 * np.sin(20.0 * x2 * d) + 20.0 * x3 * d - 20.0 * x4 * d ** 2 + 5.0,
    ])
    out = curves[arch - 1, np.arange(n)]
    return float(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class Ihdp3Surface(ResponseSurface):
    """Four-archetype single-intervention surface.

    The first five covariate columns are min-max scaled with bounds taken
    from the matrix the surface was built on.
    """

    lo: np.ndarray
    span: np.ndarray
    col_a: int
    col_b: int
    k: int = 1

    @classmethod
    def from_covariates(cls, X: CovariateMatrix, col_a: str = "b.marr", col_b: str = "mom.lths") -> "Ihdp3Surface":
        if X.m < 5:
            raise ValueError("IHDP-3 needs at least five covariate columns")
        assign_archetypes(X, col_a, col_b)
        head = X.values[:, :5]
        lo = head.min(axis=0)
        span = head.max(axis=0) - lo
        return cls(lo, span, X.names.index(col_a), X.names.index(col_b))

    def scale(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.span > 0, self.span, 1.0)
        return np.where(self.span > 0, (x[:, :5] - self.lo) / safe, 0.0)

    def archetypes(self, x) -> np.ndarray:
        x = _rows(x)
        return _archetype_of(x[:, self.col_a], x[:, self.col_b])

    def _evaluate(self, t, d, x):
        return ihdp3_response(self.archetypes(x), self.scale(x), d)

    def modal_dose(self, t, x) -> np.ndarray:
        return ihdp3_modal_dose(self.archetypes(x))


# --- TCGA-2 style ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Tcga2StyleSurface(ResponseSurface):
    """Three parametric curve families over projections of normalised covariates.

    Each intervention ``t`` owns three unit-norm weight vectors; with
    projections ``a, b, c`` of the row-normalised covariates:

    * family 0: ``10 (a + 12 b d - 12 c d^2)``
    * family 1: ``10 (a + sin(pi (b / c) d))``
    * family 2: ``10 (a + 12 b d (d - 0.75 b / c)^2)``

    Intervention ``t`` uses family ``t mod 3``.
    """

    weights: np.ndarray  # (k, 3, m)
    lo: np.ndarray
    span: np.ndarray

    @property
    def k(self) -> int:  # type: ignore[override]
        return self.weights.shape[0]

    @classmethod
    def from_covariates(cls, X: CovariateMatrix, k: int = 3, seed: SeedTree | int = 0) -> "Tcga2StyleSurface":
        if k < 1:
            raise ValueError("k must be >= 1")
        rng = as_seed(seed).rng()
        w = rng.uniform(0.0, 10.0, size=(k, 3, X.m))
        w /= np.linalg.norm(w, axis=2, keepdims=True)
        lo = X.values.min(axis=0)
        return cls(w, lo, X.values.max(axis=0) - lo)

    def normalise(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.span > 0, self.span, 1.0)
        z = np.clip(np.where(self.span > 0, (x - self.lo) / safe, 0.0), 0.0, 1.0)
        norm = np.linalg.norm(z, axis=1, keepdims=True)
        return z / np.where(norm > 0, norm, 1.0)

    def _evaluate(self, t, d, x):
        z = self.normalise(x)
        proj = np.einsum("nm,nim->ni", z, self.weights[t])
        a, b = proj[:, 0], proj[:, 1]
        c = np.maximum(proj[:, 2], 1e-6)
        ratio = b / c
        fam = t % 3
        f0 = a + 12.0 * b * d - 12.0 * c * d ** 2
        f1 = a + np.sin(np.pi * ratio * d)
        f2 = a + 12.0 * b * d * (d - 0.75 * ratio) ** 2
        return 10.0 * np.choose(fam, [f0, f1, f2])


# --- Synth-1 style --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Synth1StyleSurface(ResponseSurface):
    """``cos(2 pi (d - 1/2)) (d^2 + 4 max(x0, x5)^3 / (1 + 2 x2^2) sin(x3))``; needs six columns."""

    k: int = 1

    def _evaluate(self, t, d, x):
        if x.shape[1] < 6:
            raise ValueError("synth1-style surface needs at least six covariates")
        x0, x2, x3, x5 = x[:, 0], x[:, 2], x[:, 3], x[:, 5]
        het = 4.0 * np.maximum(x0, x5) ** 3 / (1.0 + 2.0 * x2 ** 2) * np.sin(x3)
        return np.cos(2.0 * np.pi * (d - 0.5)) * (d ** 2 + het)
