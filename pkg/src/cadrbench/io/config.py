"""Experiment configuration (JSON), validated with pydantic; unknown keys are rejected."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core import ScenarioId
from ..estimators import FAMILIES

DGP_CHOICES = ("ihdp3", "tcga2-style", "synth1-style", "custom-from-files")
SURFACES = ("ihdp3", "tcga2-style", "synth1-style")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file position or field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CovariateBlock(_Strict):
    path: str | None = None
    binary: list[str] = Field(default_factory=list)
    sidecar: str | None = None
    generator: Literal["ihdp3-surrogate", "synth1-style"] | None = None
    n: int | None = Field(default=None, ge=1)
    m: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if self.path is not None and (self.generator is not None or self.n is not None or self.m is not None):
            raise ValueError("give either a covariate path or generator parameters, not both")
        return self


class DgpBlock(_Strict):
    kind: Literal["ihdp3", "tcga2-style", "synth1-style", "custom-from-files"]
    surface: Literal["ihdp3", "tcga2-style", "synth1-style"] | None = None
    covariates: CovariateBlock = Field(default_factory=CovariateBlock)
    k: int = Field(default=3, ge=1)
    alpha: float = 2.0
    kappa: float = Field(default=2.0, ge=0)
    sigma: float = Field(default=0.5, ge=0)
    n: int | None = Field(default=None, ge=3)

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if not math.isfinite(v) or v < 1:
            raise ValueError(f"alpha must satisfy α ≥ 1 (got {v})")
        return v

    @model_validator(mode="after")
    def _files(self):
        if self.kind == "custom-from-files":
            if self.covariates.path is None:
                raise ValueError("custom-from-files needs covariates.path")
            if self.surface is None:
                raise ValueError(f"custom-from-files needs a surface, one of {SURFACES}")
        elif self.surface is not None and self.surface != self.kind:
            raise ValueError(f"surface {self.surface!r} conflicts with kind {self.kind!r}")
        return self

    @property
    def surface_kind(self) -> str:
        return self.surface or self.kind


class DecompositionBlock(_Strict):
    scenarios: Literal["auto"] | list[ScenarioId] = "auto"
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    order: Literal["treatment-first", "dose-first"] = "treatment-first"
    tune_per_scenario: bool = True

    @field_validator("fractions")
    @classmethod
    def _fractions(cls, v):
        if any(f <= 0 for f in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError("split fractions must be positive and sum to 1")
        return v

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("replication seeds must be distinct")
        if any(s < 0 for s in v):
            raise ValueError("replication seeds must be non-negative")
        return v


class EstimatorBlock(_Strict):
    family: Literal[FAMILIES]  # type: ignore[valid-type]
    name: str | None = None
    search_budget: int = Field(default=10, ge=1)
    hyperparams: dict[str, Any] = Field(default_factory=dict)
    space: dict[str, list[Any]] | None = None
    command: list[str] | None = None
    timeout: float = Field(default=60.0, gt=0)

    @model_validator(mode="after")
    def _external(self):
        if self.family == "external" and not self.command:
            raise ValueError("external estimators need a command")
        if self.space:
            empty = [k for k, v in self.space.items() if not v]
            if empty:
                raise ValueError(f"empty search space entries: {empty}")
        return self

    @property
    def label(self) -> str:
        return self.name or self.family


class EvaluationBlock(_Strict):
    grid: int = Field(default=65, ge=2)
    bins: int = Field(default=10, ge=2)
    diagnostics: bool = True


class OutputBlock(_Strict):
    dir: str = "results"
    formats: list[Literal["csv", "json", "markdown", "svg"]] = Field(
        default_factory=lambda: ["csv", "json", "markdown", "svg"]
    )


class ExperimentConfig(_Strict):
    seed: int = Field(default=0, ge=0, lt=2**64)
    dgp: DgpBlock
    decomposition: DecompositionBlock = Field(default_factory=DecompositionBlock)
    estimators: list[EstimatorBlock] = Field(min_length=1)
    evaluation: EvaluationBlock = Field(default_factory=EvaluationBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _names(self):
        labels = [e.label for e in self.estimators]
        dup = sorted({n for n in labels if labels.count(n) > 1})
        if dup:
            raise ValueError(f"duplicate estimator names: {dup}")
        if self.dgp.kind in ("ihdp3", "synth1-style") or self.dgp.surface in ("ihdp3", "synth1-style"):
            if isinstance(self.decomposition.scenarios, list):
                bad = [s.value for s in self.decomposition.scenarios if s.involves_interventions]
                if bad:
                    raise ValueError(f"scenarios {bad} need more than one intervention")
        return self

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"seed": int(seed)})

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {err['loc'][-1]!r}"
        parts.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(parts)


def parse_config(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config mapping; relative file paths resolve against ``base_dir``."""
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_validation(exc)}") from None
    base_dir = Path(base_dir or ".")
    cov = cfg.dgp.covariates
    updates = {}
    for field in ("path", "sidecar"):
        value = getattr(cov, field)
        if value is None:
            continue
        p = Path(value)
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise ConfigError(f"invalid config: dgp.covariates.{field}: file not found: {p}")
        updates[field] = str(p)
    if updates:
        dgp = cfg.dgp.model_copy(update={"covariates": cov.model_copy(update=updates)})
        cfg = cfg.model_copy(update={"dgp": dgp})
    return cfg


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    cfg = parse_config(data, path.parent)
    return cfg if seed is None else cfg.with_seed(seed)


__all__ = [
    "ConfigError", "CovariateBlock", "DecompositionBlock", "DgpBlock", "EstimatorBlock", "EvaluationBlock",
    "ExperimentConfig", "OutputBlock", "load_config", "parse_config",
]
