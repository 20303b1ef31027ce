"""Confounded intervention and dose assignment mechanisms."""

from __future__ import annotations

import numpy as np

from ..core import CovariateMatrix, InterventionSpace, SeedTree, as_seed
from .sampling import sample_beta_modes, sample_categorical, softmax
from .surfaces import ResponseSurface, _rows


def intervention_probabilities(x, kappa: float, response: ResponseSurface) -> np.ndarray:
    """Softmax over each unit's best-response scores.

    Scores are divided by the unit's largest absolute score before the
    temperature ``kappa`` is applied, so ``kappa = 0`` is uniform.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    scores = response.best_response(x)
    scale = np.abs(scores).max(axis=1, keepdims=True)
    z = np.where(scale > 0, scores / np.where(scale > 0, scale, 1.0), 0.0)
    return softmax(kappa * z, axis=1)


def confounded_intervention_assignment(
    X: CovariateMatrix | np.ndarray,
    space: InterventionSpace,
    kappa: float,
    response: ResponseSurface,
    seed: SeedTree | int,
) -> np.ndarray:
    x = _rows(X)
    if space.k == 1:
        return np.zeros(len(x), dtype=np.int64)
    if response.k != space.k:
        raise ValueError(f"response surface has {response.k} interventions, space has {space.k}")
    probs = intervention_probabilities(x, kappa, response)
    return sample_categorical(probs, as_seed(seed).rng())


def dose_concentration(alpha: float) -> float:
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return 2.0 * alpha


def confounded_dose_assignment(
    X: CovariateMatrix | np.ndarray,
    t: np.ndarray,
    alpha: float,
    response: ResponseSurface,
    seed: SeedTree | int,
) -> np.ndarray:
    """Beta-distributed doses whose mode is each unit's best dose.

    Concentration ``2 * alpha``; ``alpha = 1`` gives Uniform[0, 1].
    """
    x = _rows(X)
    c = dose_concentration(alpha)
    modes = np.broadcast_to(response.modal_dose(t, x), (len(x),))
    return sample_beta_modes(modes, c, as_seed(seed).rng())
