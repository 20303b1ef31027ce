"""Configuration, covariate ingestion and result emission."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .covariates import CovariateFileError, load_covariates, write_covariates, write_dataset
from .experiment import build_dgp, build_estimators, plan_from_config
from .plots import emit_plots, error_profile_svg, mise_bars_svg, write_curves
from .results import load_results, render_report, results_payload, write_results

__all__ = [
    "ConfigError", "CovariateFileError", "ExperimentConfig", "build_dgp", "build_estimators", "emit_plots",
    "error_profile_svg", "load_config", "load_covariates", "load_results", "mise_bars_svg", "parse_config",
    "plan_from_config", "render_report", "results_payload", "write_covariates", "write_curves",
    "write_dataset", "write_results",
]
