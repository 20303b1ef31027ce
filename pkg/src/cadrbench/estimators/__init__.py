"""Pluggable CADR estimators behind one fit/predict contract."""

from __future__ import annotations

import time

import numpy as np

from ..core import SeedTree, as_seed
from .base import FAMILIES, EstimatorSpec, FeatureEncoding, Family, FitError, Rows, TrainedModel, encode
from .external import ExternalEstimator, ExternalEstimatorError
from .linear import Ridge, SplineAdditive
from .nn import NEURAL, DRNetLite, MLP, VCNetLite, analytic_gradient, bspline_basis, mlp_gradient_check
from .trees import GradientBoostedTrees, RegressionTree, best_split, build_tree

BUILTIN = {
    "ridge": Ridge,
    "cart": RegressionTree,
    "gbt": GradientBoostedTrees,
    "spline-additive": SplineAdditive,
    **NEURAL,
}

# Default search spaces; pinned single values are listed for completeness.
DEFAULT_SPACES: dict[str, dict[str, list]] = {
    "ridge": {"lam": [0.0, 1e-3, 1e-1]},
    "cart": {
        "max_depth": [5, 15, None],
        "min_split": [2, 5, 20],
        "min_leaf": [1, 5, 10],
        "max_features": [None, "sqrt"],
    },
    "gbt": {
        "learning_rate": [0.01, 0.1, 0.2],
        "max_depth": [3, 5, 7, 9],
        "subsample": [0.5, 0.7, 1.0],
        "min_child_weight": [1, 3, 5],
        "gamma": [0.0, 0.1, 0.2],
        "colsample": [0.3, 0.5, 0.7],
    },
    "spline-additive": {"n_knots": [4, 8, 12]},
    "mlp": {
        "learning_rate": [1e-4, 1e-3],
        "l2": [0.0, 0.1],
        "batch_size": [64, 128],
        "hidden": [32, 48],
        "steps": [5000],
        "layers": [2],
    },
    "drnet-lite": {
        "learning_rate": [1e-4, 1e-3],
        "l2": [0.0, 0.1],
        "batch_size": [64, 128],
        "hidden": [32, 48],
        "strata": [10],
        "steps": [5000],
        "layers": [2],
    },
    "vcnet-lite": {
        "learning_rate": [1e-3, 1e-2],
        "batch_size": [128, 256],
        "hidden": [32],
        "steps": [5000],
    },
    "external": {},
}


def make_family(spec: EstimatorSpec, hyperparams: dict | None = None, seed: SeedTree | int = 0) -> Family:
    hp = {**spec.hyperparams, **(hyperparams or {})}
    if spec.family == "external":
        return ExternalEstimator(spec.command, spec.timeout, as_seed(seed).as_int(), **hp)
    return BUILTIN[spec.family](**hp)


def fit(
    spec: EstimatorSpec,
    train: Rows,
    val: Rows | None,
    seed: SeedTree | int = 0,
    *,
    k: int = 1,
    hyperparams: dict | None = None,
) -> TrainedModel:
    """Fit one configuration of ``spec`` on ``train`` (``val`` drives snapshots)."""
    seed = as_seed(seed)
    if train.x.shape[1] < 1:
        raise FitError(f"{spec.family}: empty feature set")
    enc = FeatureEncoding(train.x.shape[1], k)
    family = make_family(spec, hyperparams, seed)
    start = time.perf_counter()
    family.fit(train, val, enc, seed.rng())
    meta = {
        "seed": seed.describe(),
        "hyperparams": {**spec.hyperparams, **(hyperparams or {})},
        "fit_seconds": time.perf_counter() - start,
        **family.meta,
    }
    return TrainedModel(spec.family, family, enc, meta)


def predict(model: TrainedModel, x, t, d) -> np.ndarray:
    return model.predict(x, t, d)


__all__ = [
    "BUILTIN", "DEFAULT_SPACES", "FAMILIES", "DRNetLite", "EstimatorSpec", "ExternalEstimator",
    "ExternalEstimatorError", "FeatureEncoding", "FitError", "GradientBoostedTrees", "MLP", "Ridge",
    "RegressionTree", "Rows", "SplineAdditive", "TrainedModel", "VCNetLite", "analytic_gradient",
    "best_split", "bspline_basis", "build_tree", "encode", "fit", "make_family", "mlp_gradient_check",
    "predict",
]
