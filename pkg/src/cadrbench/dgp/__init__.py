"""Synthetic data-generating processes."""

from .assignment import (
    confounded_dose_assignment,
    confounded_intervention_assignment,
    dose_concentration,
    intervention_probabilities,
)
from .covariates import IHDP_BINARY, synthetic_covariates
from .sampling import (
    BetaModeParams,
    beta_from_mode,
    sample_beta_mode,
    sample_beta_modes,
    sample_uniform_doses,
    sample_uniform_interventions,
)
from .spec import (
    DGP_KINDS,
    BaseVectors,
    DgpSpec,
    add_noise,
    generate_base_vectors,
    make_dgp,
    shuffle_vector,
)
from .surfaces import (
    Archetype,
    ArchetypeAssignment,
    FunctionSurface,
    Ihdp3Surface,
    ResponseSurface,
    Synth1StyleSurface,
    Tcga2StyleSurface,
    assign_archetypes,
    ihdp3_modal_dose,
    ihdp3_response,
)

__all__ = [
    "Archetype", "ArchetypeAssignment", "BaseVectors", "BetaModeParams", "DGP_KINDS", "DgpSpec",
    "FunctionSurface", "IHDP_BINARY", "Ihdp3Surface", "ResponseSurface", "Synth1StyleSurface",
    "Tcga2StyleSurface", "add_noise", "assign_archetypes", "beta_from_mode",
    "confounded_dose_assignment", "confounded_intervention_assignment", "dose_concentration",
    "generate_base_vectors", "ihdp3_modal_dose", "ihdp3_response", "intervention_probabilities",
    "make_dgp", "sample_beta_mode", "sample_beta_modes", "sample_uniform_doses",
    "sample_uniform_interventions", "shuffle_vector", "synthetic_covariates",
]
