"""Random hyperparameter search under the factual (validation MSE) criterion."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import SeedTree, as_seed
from .estimators import DEFAULT_SPACES, EstimatorSpec, FitError, Rows, TrainedModel, fit


@dataclass(frozen=True)
class SearchSpace:
    """Finite value lists per hyperparameter; configurations are their cartesian product."""

    values: dict[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for key, vals in self.values.items():
            vals = tuple(vals)
            if not vals:
                raise ValueError(f"search space entry {key!r} is empty")
            frozen[key] = vals
        object.__setattr__(self, "values", frozen)

    @classmethod
    def for_spec(cls, spec: EstimatorSpec) -> "SearchSpace":
        """Family defaults, overridden by ``spec.space``, with ``spec.hyperparams`` pinned."""
        values = dict(DEFAULT_SPACES.get(spec.family, {}))
        values.update(spec.space or {})
        for key, val in spec.hyperparams.items():
            values[key] = [val]
        return cls(values)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.values.values())

    def __len__(self) -> int:
        return self.size

    def configs(self) -> list[dict]:
        """All configurations in canonical (insertion, then value) order."""
        keys = list(self.values)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.values.values())]


@dataclass
class Candidate:
    draw: int
    hyperparams: dict
    val_mse: float
    error: str | None = None


@dataclass
class SearchResult:
    best: EstimatorSpec
    model: TrainedModel | None
    candidates: list[Candidate]
    budget_used: int
    seed: str

    @property
    def best_hyperparams(self) -> dict:
        return dict(self.best.hyperparams)

    @property
    def best_val_mse(self) -> float:
        return min(c.val_mse for c in self.candidates if c.error is None)


class SearchError(FitError):
    """Every candidate of a search failed."""


def validation_mse(model: TrainedModel, rows: Rows) -> float:
    pred = model.predict(rows.x, rows.t, rows.d)
    return float(np.mean((rows.y - pred) ** 2))


def random_search(
    spec: EstimatorSpec,
    train: Rows,
    val: Rows,
    seed: SeedTree | int = 0,
    *,
    k: int = 1,
    budget: int | None = None,
    space: SearchSpace | None = None,
) -> SearchResult:
    """Fit ``min(budget, |space|)`` distinct configurations and keep the best.

    The winner has the lowest validation MSE; ties go to the earliest draw.
    Only the winning model is kept open, the others are closed right away.
    """
    seed = as_seed(seed)
    space = space or SearchSpace.for_spec(spec)
    budget = spec.search_budget if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be >= 1")
    configs = space.configs()
    n_draw = min(budget, len(configs))
    if n_draw == len(configs):
        order = np.arange(len(configs))
    else:
        order = seed.child("draws").rng().choice(len(configs), size=n_draw, replace=False)

    candidates: list[Candidate] = []
    best_model, best_key = None, None
    for draw, ci in enumerate(order):
        hp = configs[int(ci)]
        try:
            model = fit(spec, train, val, seed.child("candidate", draw), k=k, hyperparams=hp)
            mse = validation_mse(model, val)
            if not math.isfinite(mse):
                model.close()
                raise FitError(f"{spec.family}: non-finite validation MSE")
        except FitError as exc:
            candidates.append(Candidate(draw, hp, math.nan, str(exc)))
            continue
        candidates.append(Candidate(draw, hp, mse))
        if best_key is None or mse < best_key[0]:
            if best_model is not None:
                best_model.close()
            best_model, best_key = model, (mse, draw, hp)
        else:
            model.close()

    if best_model is None:
        raise SearchError(
            f"{spec.name}: all {len(candidates)} candidates failed; first error: {candidates[0].error}",
            {"candidates": [(c.hyperparams, c.error) for c in candidates]},
        )
    best_spec = EstimatorSpec(
        spec.family, spec.name, {**spec.hyperparams, **best_key[2]}, spec.search_budget,
        spec.space, spec.command, spec.timeout,
    )
    return SearchResult(best_spec, best_model, candidates, len(candidates), seed.describe())


__all__ = ["Candidate", "SearchError", "SearchResult", "SearchSpace", "random_search", "validation_mse"]
