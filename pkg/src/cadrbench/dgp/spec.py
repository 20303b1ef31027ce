"""DGP description, base-vector generation and outcome noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import CovariateMatrix, InterventionSpace, SeedTree, as_seed
from .assignment import confounded_dose_assignment, confounded_intervention_assignment
from .covariates import synthetic_covariates
from .sampling import sample_uniform_doses, sample_uniform_interventions
from .surfaces import Ihdp3Surface, ResponseSurface, Synth1StyleSurface, Tcga2StyleSurface

DGP_KINDS = ("ihdp3", "tcga2-style", "synth1-style")


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """A complete synthetic data-generating process over a fixed covariate matrix.

    ``kappa`` controls intervention confounding (0 = uniform) and ``alpha``
    dose confounding (1 = uniform).
    """

    name: str
    X: CovariateMatrix
    space: InterventionSpace
    response: ResponseSurface
    kappa: float = 2.0
    alpha: float = 2.0
    noise_sigma: float = 0.5

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.response.k != self.space.k:
            raise ValueError(f"response surface has {self.response.k} interventions, space has {self.space.k}")

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def n(self) -> int:
        return self.X.n

    def assign_interventions(self, seed, X=None) -> np.ndarray:
        X = self.X if X is None else X
        return confounded_intervention_assignment(X, self.space, self.kappa, self.response, seed)

    def assign_doses(self, t, seed, X=None) -> np.ndarray:
        X = self.X if X is None else X
        return confounded_dose_assignment(X, t, self.alpha, self.response, seed)

    def mu(self, t, d, X=None) -> np.ndarray:
        X = self.X if X is None else X
        return self.response(t, d, X)


@dataclass(frozen=True, eq=False)
class BaseVectors:
    """Intervention and dose vectors shared by every scenario of one replication.

    ``extra`` holds the additional dose vectors needed by dose-first ordering.
    """

    t_rand: np.ndarray
    t_conf: np.ndarray
    t_nonu: np.ndarray
    d_rand: np.ndarray
    d_conf: np.ndarray
    d_nonu: np.ndarray
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t_rand", "t_conf", "t_nonu", "d_rand", "d_conf", "d_nonu"):
            getattr(self, name).flags.writeable = False


def shuffle_vector(v, seed: SeedTree | int) -> np.ndarray:
    """Uniformly random permutation of ``v``; the input is left untouched."""
    v = np.asarray(v)
    return v[as_seed(seed).rng().permutation(len(v))]


def generate_base_vectors(spec: DgpSpec, seed: SeedTree | int, order: str = "treatment-first") -> BaseVectors:
    """Draw every vector the decomposition needs from one seed.

    Each vector uses its own labelled child stream.
    """
    seed = as_seed(seed)
    n = spec.n
    t_rand = sample_uniform_interventions(n, spec.space, seed.child("t_rand"))
    t_conf = spec.assign_interventions(seed.child("t_conf"))
    t_nonu = shuffle_vector(t_conf, seed.child("t_shuffle"))
    d_rand = sample_uniform_doses(n, seed.child("d_rand"))
    d_conf = spec.assign_doses(t_conf, seed.child("d_conf"))
    d_nonu = shuffle_vector(d_conf, seed.child("d_shuffle"))
    extra = {}
    if order == "dose-first" and spec.k > 1:
        d_conf_trand = spec.assign_doses(t_rand, seed.child("d_conf_trand"))
        extra = {
            "d_conf_trand": d_conf_trand,
            "d_nonu_trand": shuffle_vector(d_conf_trand, seed.child("d_shuffle_trand")),
            "d_conf_tnonu": spec.assign_doses(t_nonu, seed.child("d_conf_tnonu")),
        }
    elif order not in ("treatment-first", "dose-first"):
        raise ValueError(f"unknown decomposition order {order!r}")
    return BaseVectors(t_rand, t_conf, t_nonu, d_rand, d_conf, d_nonu, extra)


def add_noise(mu_values, sigma: float, seed: SeedTree | int) -> np.ndarray:
    """``mu + eps`` with ``eps ~ Normal(0, sigma^2)`` i.i.d."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    mu_values = np.asarray(mu_values, dtype=float)
    if sigma == 0:
        return mu_values.copy()
    return mu_values + as_seed(seed).rng().normal(0.0, sigma, size=mu_values.shape)


def make_dgp(
    kind: str,
    X: CovariateMatrix | None = None,
    *,
    n: int | None = None,
    m: int | None = None,
    k: int = 3,
    kappa: float = 2.0,
    alpha: float = 2.0,
    sigma: float = 0.5,
    seed: SeedTree | int = 0,
) -> DgpSpec:
    """Build one of the shipped DGPs.

    When ``X`` is omitted, covariates are drawn from the matching synthetic
    generator. Covariates and surface parameters use separate child streams
    of ``seed``.
    """
    seed = as_seed(seed)
    if kind == "ihdp3":
        if X is None:
            X = synthetic_covariates("ihdp3-surrogate", n or 747, m or 25, seed.child("covariates"))
        return DgpSpec("ihdp3", X, InterventionSpace.of_size(1), Ihdp3Surface.from_covariates(X),
                       kappa=kappa, alpha=alpha, noise_sigma=sigma)
    if kind == "tcga2-style":
        if X is None:
            X = synthetic_covariates("synth1-style", n or 2000, m or 20, seed.child("covariates"))
        surface = Tcga2StyleSurface.from_covariates(X, k, seed.child("surface"))
        return DgpSpec("tcga2-style", X, InterventionSpace.of_size(k), surface,
                       kappa=kappa, alpha=alpha, noise_sigma=sigma)
    if kind == "synth1-style":
        if X is None:
            X = synthetic_covariates("synth1-style", n or 700, m or 6, seed.child("covariates"))
        return DgpSpec("synth1-style", X, InterventionSpace.of_size(1), Synth1StyleSurface(),
                       kappa=kappa, alpha=alpha, noise_sigma=sigma)
    raise ValueError(f"unknown DGP kind {kind!r}; expected one of {DGP_KINDS}")
