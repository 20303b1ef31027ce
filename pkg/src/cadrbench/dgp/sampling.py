"""Random primitives used by the assignment mechanisms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import InterventionSpace, SeedTree, as_seed


def _k(space) -> int:
    return space.k if isinstance(space, InterventionSpace) else int(space)


def sample_uniform_interventions(n: int, space: InterventionSpace | int, seed: SeedTree | int) -> np.ndarray:
    """i.i.d. uniform intervention indices in ``0..k-1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return as_seed(seed).rng().integers(0, _k(space), size=n)


def sample_uniform_doses(n: int, seed: SeedTree | int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return as_seed(seed).rng().random(n)


@dataclass(frozen=True)
class BetaModeParams:
    """Beta distribution described by its mode and a concentration ``c = a + b``."""

    mode: float
    concentration: float = 2.0

    def __post_init__(self):
        beta_from_mode(self.mode, self.concentration)

    @property
    def shape(self) -> tuple[float, float]:
        return beta_from_mode(self.mode, self.concentration)


def beta_from_mode(mode, c):
    """Shape parameters ``(a, b)`` of the Beta distribution with the given mode.

    ``a = 1 + mode (c - 2)`` and ``b = 1 + (1 - mode)(c - 2)``, so ``a + b = c``
    and both are at least one. ``c == 2`` is the uniform distribution.
    Works elementwise on arrays.
    """
    mode_arr = np.asarray(mode, dtype=float)
    c_arr = np.asarray(c, dtype=float)
    if np.any(~np.isfinite(mode_arr)) or np.any((mode_arr < 0) | (mode_arr > 1)):
        raise ValueError(f"beta mode must lie in [0, 1], got {mode!r}")
    if np.any(~np.isfinite(c_arr)) or np.any(c_arr < 2):
        raise ValueError(f"beta concentration must be >= 2, got {c!r}")
    a = 1.0 + mode_arr * (c_arr - 2.0)
    b = 1.0 + (1.0 - mode_arr) * (c_arr - 2.0)
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


def sample_beta_mode(params: BetaModeParams, seed: SeedTree | int) -> float:
    a, b = params.shape
    return float(as_seed(seed).rng().beta(a, b))


def sample_beta_modes(modes: np.ndarray, concentration: float, rng: np.random.Generator) -> np.ndarray:
    """One Beta draw per unit, each with its own mode."""
    a, b = beta_from_mode(np.asarray(modes, dtype=float), concentration)
    return np.clip(rng.beta(a, b), 0.0, 1.0)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise categorical draws from an ``(n, k)`` probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(len(probs))
    return (u[:, None] >= cdf).sum(axis=1)
