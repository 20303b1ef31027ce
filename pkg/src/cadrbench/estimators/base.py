"""Common estimator contract: specs, feature encoding and the family base class."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

FAMILIES = ("ridge", "cart", "gbt", "spline-additive", "mlp", "drnet-lite", "vcnet-lite", "external")


class FitError(RuntimeError):
    """Raised when a family cannot produce a model (e.g. non-finite loss)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Rows(NamedTuple):
    x: np.ndarray
    t: np.ndarray
    d: np.ndarray
    y: np.ndarray | None = None

    def __len__(self):  # type: ignore[override]
        return len(self.d)

    @classmethod
    def of(cls, x, t, d, y=None) -> "Rows":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = len(x)
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (n,))
        d = np.broadcast_to(np.asarray(d, dtype=float), (n,))
        y = None if y is None else np.asarray(y, dtype=float)
        return cls(x, t, d, y)

    def subset(self, idx) -> "Rows":
        return Rows(self.x[idx], self.t[idx], self.d[idx], None if self.y is None else self.y[idx])


@dataclass(frozen=True)
class EstimatorSpec:
    """Family, fixed hyperparameters and search settings for one named estimator.

    ``space`` overrides entries of the family's default search space; keys in
    ``hyperparams`` are pinned to a single value.
    """

    family: str
    name: str = ""
    hyperparams: dict = field(default_factory=dict)
    search_budget: int = 10
    space: dict | None = None
    command: tuple[str, ...] | None = None
    timeout: float = 60.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown estimator family {self.family!r}; expected one of {FAMILIES}")
        if not self.name:
            object.__setattr__(self, "name", self.family)
        if self.search_budget < 1:
            raise ValueError("search_budget must be >= 1")
        if self.family == "external" and not self.command:
            raise ValueError("external estimators need a command line")
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))


@dataclass(frozen=True)
class FeatureEncoding:
    """Covariates as-is, one-hot intervention (omitted when k == 1), dose last."""

    m: int
    k: int

    @property
    def width(self) -> int:
        return self.m + (self.k if self.k > 1 else 0) + 1

    @property
    def dose_column(self) -> int:
        return self.width - 1

    def onehot(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.int64)
        if np.any((t < 0) | (t >= self.k)):
            raise KeyError(f"intervention index outside 0..{self.k - 1}")
        if self.k == 1:
            return np.zeros((len(t), 0))
        out = np.zeros((len(t), self.k))
        out[np.arange(len(t)), t] = 1.0
        return out

    def encode(self, x, t, d) -> np.ndarray:
        rows = Rows.of(x, t, d)
        if rows.x.shape[1] != self.m:
            raise ValueError(f"expected {self.m} covariates, got {rows.x.shape[1]}")
        return np.hstack([rows.x, self.onehot(rows.t), rows.d[:, None]])


def encode(x, t, d, encoding: FeatureEncoding) -> np.ndarray:
    """Encode a single (x, t, d) triple as one numeric row."""
    return encoding.encode(np.atleast_2d(x), [t], [d])[0]


class Family:
    """Base for built-in families.

    Subclasses set ``defaults`` and implement ``_fit`` / ``_predict`` on raw
    ``Rows``; fitted state lives on the instance.
    """

    family = ""
    defaults: dict[str, Any] = {}

    def __init__(self, **hyperparams):
        unknown = set(hyperparams) - set(self.defaults)
        if unknown:
            raise ValueError(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        self.hp = {**self.defaults, **hyperparams}
        self.meta: dict[str, Any] = {}

    def fit(self, train: Rows, val: Rows | None, enc: FeatureEncoding, rng: np.random.Generator):
        if len(train) < 2:
            raise FitError(f"{self.family}: need at least two training rows")
        if enc.width < 1:
            raise FitError(f"{self.family}: empty feature set")
        if not np.all(np.isfinite(train.y)):
            raise FitError(f"{self.family}: non-finite training targets")
        self.enc = enc
        self._fit(train, val, rng)
        return self

    def predict(self, rows: Rows) -> np.ndarray:
        return self._predict(rows)

    def _fit(self, train: Rows, val: Rows | None, rng: np.random.Generator):
        raise NotImplementedError

    def _predict(self, rows: Rows) -> np.ndarray:
        raise NotImplementedError

    def close(self):
        pass


@dataclass(eq=False)
class TrainedModel:
    """A fitted predictor mu_hat(t, d, x) plus training metadata."""

    family: str
    model: Family
    encoding: FeatureEncoding
    meta: dict = field(default_factory=dict)

    def predict(self, x, t, d) -> np.ndarray:
        """Vectorised predictions; scalars broadcast over the rows of ``x``."""
        rows = Rows.of(x, t, d)
        out = np.asarray(self.model.predict(rows), dtype=float)
        if out.shape != (len(rows),):
            raise FitError(f"{self.family}: prediction shape {out.shape} != ({len(rows)},)")
        return out

    def predict_one(self, x, t: int, d: float) -> float:
        return float(self.predict(np.atleast_2d(x), t, d)[0])

    def close(self):
        self.model.close()
