"""Turn a validated config into a DGP, estimator specs and a decomposition plan."""

from __future__ import annotations

from ..core import SeedTree
from ..decomposition import DecompositionPlan, build_plan
from ..dgp import DgpSpec, make_dgp
from ..estimators import EstimatorSpec
from .config import ConfigError, ExperimentConfig
from .covariates import CovariateFileError, load_covariates


def build_dgp(cfg: ExperimentConfig) -> DgpSpec:
    """The DGP is fixed by the root seed; replications never redraw it."""
    block = cfg.dgp
    cov = block.covariates
    X = None
    if cov.path is not None:
        try:
            X = load_covariates(cov.path, cov.sidecar, cov.binary)
        except (OSError, CovariateFileError) as exc:
            raise ConfigError(f"invalid config: dgp.covariates.path: {exc}") from None
    n = block.n if block.n is not None else cov.n
    try:
        return make_dgp(
            block.surface_kind, X, n=n, m=cov.m, k=block.k, kappa=block.kappa, alpha=block.alpha,
            sigma=block.sigma, seed=SeedTree(cfg.seed).child("dgp"),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: dgp: {exc}") from None


def build_estimators(cfg: ExperimentConfig) -> list[EstimatorSpec]:
    return [
        EstimatorSpec(
            e.family, e.label, dict(e.hyperparams), e.search_budget,
            None if e.space is None else {k: list(v) for k, v in e.space.items()},
            None if e.command is None else tuple(e.command), e.timeout,
        )
        for e in cfg.estimators
    ]


def plan_from_config(cfg: ExperimentConfig, dgp: DgpSpec | None = None) -> DecompositionPlan:
    dgp = dgp or build_dgp(cfg)
    dec = cfg.decomposition
    try:
        return build_plan(
            dgp, build_estimators(cfg), dec.seeds, dec.fractions,
            order=dec.order,
            scenarios=None if dec.scenarios == "auto" else dec.scenarios,
            tune_per_scenario=dec.tune_per_scenario,
            root=cfg.seed,
            grid_size=cfg.evaluation.grid,
            bins=cfg.evaluation.bins,
            dataset=cfg.dgp.kind,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


__all__ = ["build_dgp", "build_estimators", "plan_from_config"]
