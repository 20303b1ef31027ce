"""Synthetic covariate generators standing in for the real benchmark matrices."""

from __future__ import annotations

import numpy as np

from ..core import CovariateMatrix, SeedTree, as_seed

IHDP_BINARY = ("b.marr", "mom.lths")
KINDS = ("ihdp3-surrogate", "synth1-style")


def synthetic_covariates(kind: str, n: int, m: int | None = None, seed: SeedTree | int = 0) -> CovariateMatrix:
    """Draw a covariate matrix.

    ``ihdp3-surrogate`` has ``m - 2`` Uniform[0, 1] columns followed by the
    two Bernoulli(0.5) columns ``b.marr`` and ``mom.lths``; ``synth1-style``
    has ``m`` Uniform[0, 1] columns (default 6).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_seed(seed).rng()
    if kind == "ihdp3-surrogate":
        m = 25 if m is None else m
        if m < 7:
            raise ValueError("ihdp3-surrogate needs m >= 7 (five continuous plus two binary columns)")
        cont = rng.random((n, m - 2))
        binary = rng.integers(0, 2, size=(n, 2)).astype(float)
        names = tuple(f"x{j}" for j in range(m - 2)) + IHDP_BINARY
        return CovariateMatrix(names, np.hstack([cont, binary]), frozenset(IHDP_BINARY))
    if kind == "synth1-style":
        m = 6 if m is None else m
        if m < 1:
            raise ValueError("m must be >= 1")
        return CovariateMatrix(tuple(f"x{j}" for j in range(m)), rng.random((n, m)))
    raise ValueError(f"unknown covariate generator {kind!r}; expected one of {KINDS}")
