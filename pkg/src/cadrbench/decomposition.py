"""Scenario decomposition: materialize the scenario datasets, schedule and execute runs.

Each replication draws one set of base vectors, one split and one noise
vector; every scenario of that replication reuses them, so scenarios differ
only in which (T, D) pair units receive.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .core import ScenarioDataset, ScenarioId, SeedTree, check_scenario, make_splits, scenario_order
from .dgp import BaseVectors, DgpSpec, add_noise, generate_base_vectors, shuffle_vector
from .estimators import EstimatorSpec, Rows, fit
from .evaluation import (
    DoseGrid, MetricBundle, aggregate, confounding_diagnostic, dose_error_profile, factual_mse, mise,
)
from .selection import random_search

ORDERS = ("treatment-first", "dose-first")


def scenario_vectors(scenario: ScenarioId, base: BaseVectors, order: str = "treatment-first"):
    """The (T, D) pair a scenario trains on.

    Treatment-first: (T_rand, D_rand), (T_nonu, D_rand), (T_conf, D_rand),
    (T_conf, D_nonu), (T_conf, D_conf). Dose-first keeps T_rand while the
    dose is degraded, then degrades the intervention under confounded doses.
    """
    S = ScenarioId
    if order not in ORDERS:
        raise ValueError(f"unknown decomposition order {order!r}")
    if order == "dose-first" and base.extra:
        table = {
            S.RANDOMIZED: (base.t_rand, base.d_rand),
            S.D_NONUNIFORM: (base.t_rand, base.extra["d_nonu_trand"]),
            S.D_CONFOUNDED: (base.t_rand, base.extra["d_conf_trand"]),
            S.T_NONUNIFORM: (base.t_nonu, base.extra["d_conf_tnonu"]),
            S.T_CONFOUNDED: (base.t_conf, base.d_conf),
        }
    else:
        # with a single intervention both orders coincide
        table = {
            S.RANDOMIZED: (base.t_rand, base.d_rand),
            S.T_NONUNIFORM: (base.t_nonu, base.d_rand),
            S.T_CONFOUNDED: (base.t_conf, base.d_rand),
            S.D_NONUNIFORM: (base.t_conf, base.d_nonu),
            S.D_CONFOUNDED: (base.t_conf, base.d_conf),
        }
    return table[scenario]


def materialize_scenario(
    scenario: ScenarioId,
    base: BaseVectors,
    dgp: DgpSpec,
    splits,
    seed: SeedTree | int,
    *,
    order: str = "treatment-first",
    seed_record: tuple = (),
) -> ScenarioDataset:
    """Build one scenario dataset.

    Outcomes come from the very (T, D) the model will train on; ``seed``
    drives the noise, so passing the same seed for every scenario gives them
    a common noise vector.
    """
    scenario = ScenarioId(scenario)
    check_scenario(scenario, dgp.k)
    t, d = scenario_vectors(scenario, base, order)
    mu = dgp.mu(t, d)
    y = add_noise(mu, dgp.noise_sigma, seed)
    return ScenarioDataset(scenario, dgp.X, t, d, y, splits, dgp.space, tuple(seed_record) + (scenario.value,), mu)


def replication_seed(root: int, replication: int) -> SeedTree:
    return SeedTree(root).child("replication", replication)


def materialize_replication(
    dgp: DgpSpec,
    root: int,
    replication: int,
    fractions=(0.7, 0.1, 0.2),
    order: str = "treatment-first",
    scenarios=None,
) -> dict[ScenarioId, ScenarioDataset]:
    rs = replication_seed(root, replication)
    base = generate_base_vectors(dgp, rs.child("base"), order)
    splits = make_splits(dgp.n, fractions, rs.child("splits"))
    record = (int(root), int(replication))
    scenarios = scenario_order(dgp.k, order) if scenarios is None else scenarios
    return {
        s: materialize_scenario(s, base, dgp, splits, rs.child("noise"), order=order, seed_record=record)
        for s in scenarios
    }


# --- plans -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    """Everything needed to run the (estimator x scenario x replication) grid.

    ``root`` seeds the replications: replication ``r`` uses the stream
    ``root -> ("replication", r)``.
    """

    dgp: DgpSpec
    scenarios: tuple[ScenarioId, ...]
    estimators: tuple[EstimatorSpec, ...]
    seeds: tuple[int, ...]
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    order: str = "treatment-first"
    tune_per_scenario: bool = True
    root: int = 0
    grid_size: int = 65
    bins: int = 10
    dataset: str = ""

    def cells(self) -> list[tuple[EstimatorSpec, ScenarioId, int]]:
        """Cells in canonical order: estimator, then replication, then scenario."""
        return [(e, s, r) for e in self.estimators for r in self.seeds for s in self.scenarios]

    def __len__(self) -> int:
        return len(self.estimators) * len(self.seeds) * len(self.scenarios)


def build_plan(
    dgp: DgpSpec,
    estimators,
    seeds,
    fractions=(0.7, 0.1, 0.2),
    *,
    order: str = "treatment-first",
    scenarios=None,
    tune_per_scenario: bool = True,
    root: int = 0,
    grid_size: int = 65,
    bins: int = 10,
    dataset: str | None = None,
) -> DecompositionPlan:
    estimators = tuple(estimators)
    seeds = tuple(int(s) for s in seeds)
    if not estimators:
        raise ValueError("plan needs at least one estimator")
    if not seeds:
        raise ValueError("plan needs at least one seed")
    names = [e.name for e in estimators]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ValueError(f"duplicate estimator names: {dup}")
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate replication seeds")
    if order not in ORDERS:
        raise ValueError(f"unknown decomposition order {order!r}")
    full = scenario_order(dgp.k, order)
    if scenarios is None:
        scenarios = full
    else:
        scenarios = tuple(ScenarioId(s) for s in scenarios)
        for s in scenarios:
            check_scenario(s, dgp.k)
        scenarios = tuple(s for s in full if s in scenarios)
    if not tune_per_scenario and ScenarioId.RANDOMIZED not in scenarios:
        raise ValueError("frozen tuning selects on the randomized scenario, which the plan must include")
    return DecompositionPlan(
        dgp, scenarios, estimators, seeds, tuple(float(f) for f in fractions), order,
        tune_per_scenario, int(root), int(grid_size), int(bins), dataset or dgp.name,
    )


# --- execution ----------------------------------------------------------------

@dataclass
class RunCell:
    estimator: str
    family: str
    scenario: ScenarioId
    seed: int
    status: str = "pending"
    metrics: MetricBundle = field(default_factory=MetricBundle)
    hyperparams: dict = field(default_factory=dict)
    profile: dict | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.estimator, self.scenario.value, self.seed)

    def record(self) -> dict:
        return {
            "estimator": self.estimator,
            "family": self.family,
            "scenario": self.scenario.value,
            "seed": self.seed,
            "status": self.status,
            "mise": self.metrics.mise,
            "factual_mse": self.metrics.factual_mse,
            "fit_seconds": self.metrics.fit_seconds,
            "error": self.metrics.error or "",
            "hyperparams": self.hyperparams,
        }


@dataclass
class DecompositionReport:
    plan: DecompositionPlan
    cells: list[RunCell]
    diagnostics: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[RunCell]:
        return [c for c in self.cells if c.status != "done"]

    def records(self) -> list[dict]:
        return [c.record() for c in self.cells]

    def aggregate(self, metric: str = "mise"):
        return aggregate(self.records(), metric)

    def cell(self, estimator: str, scenario, seed: int) -> RunCell:
        key = (estimator, ScenarioId(scenario).value, int(seed))
        for c in self.cells:
            if c.key == key:
                return c
        raise KeyError(key)

    def mise_table(self, estimator: str) -> np.ndarray:
        """MISE per (replication, scenario) for one estimator, NaN where failed."""
        out = np.full((len(self.plan.seeds), len(self.plan.scenarios)), math.nan)
        for c in self.cells:
            if c.estimator == estimator:
                out[self.plan.seeds.index(c.seed), self.plan.scenarios.index(c.scenario)] = c.metrics.mise
        return out


def _rows(ds: ScenarioDataset, which: str) -> Rows:
    return Rows(*ds.part(which))


def _evaluate_cell(cell: RunCell, spec: EstimatorSpec, hp: dict | None, ds: ScenarioDataset,
                   plan: DecompositionPlan, seed: SeedTree) -> dict | None:
    """Fit (searching unless ``hp`` is given), then score; fills ``cell`` in place.

    Returns the selected hyperparameters, or None on failure.
    """
    train, val = _rows(ds, "train"), _rows(ds, "val")
    model = None
    try:
        start = time.perf_counter()
        if hp is None:
            result = random_search(spec, train, val, seed.child("search"), k=ds.space.k)
            model, hp = result.model, result.best_hyperparams
        else:
            model = fit(spec, train, val, seed.child("search").child("candidate", 0), k=ds.space.k,
                        hyperparams=hp)
        elapsed = time.perf_counter() - start
        grid = DoseGrid.uniform(plan.grid_size)
        cell.metrics = MetricBundle(
            mise=mise(model, plan.dgp.response, ds.part("test")[0], ds.space, grid),
            factual_mse=factual_mse(model, ds, "test"),
            fit_seconds=elapsed,
        )
        cell.profile = dose_error_profile(model, plan.dgp.response, ds, plan.bins, grid).to_dict()
        cell.hyperparams = dict(hp)
        cell.status = "done"
        return hp
    except Exception as exc:  # a failing cell never aborts the plan
        cell.metrics = MetricBundle(error=f"{type(exc).__name__}: {exc}")
        cell.status = "failed"
        return None
    finally:
        if model is not None:
            model.close()


def _run_group(plan: DecompositionPlan, est_index: int, replication: int, scenarios) -> list[RunCell]:
    """Run one estimator on one replication for the given scenarios."""
    spec = plan.estimators[est_index]
    with threadpool_limits(1):
        data = materialize_replication(plan.dgp, plan.root, replication, plan.fractions, plan.order, plan.scenarios)
        # one estimator stream per replication, shared by its scenarios (common random numbers)
        rs = replication_seed(plan.root, replication).child(f"estimator:{spec.name}")
        cells = []
        frozen = None
        for s in scenarios:
            cell = RunCell(spec.name, spec.family, s, replication)
            if not plan.tune_per_scenario and s != ScenarioId.RANDOMIZED:
                if frozen is None:
                    cell.metrics = MetricBundle(error="frozen tuning: selection on the randomized scenario failed")
                    cell.status = "failed"
                    cells.append(cell)
                    continue
                _evaluate_cell(cell, spec, frozen, data[s], plan, rs)
            else:
                hp = _evaluate_cell(cell, spec, None, data[s], plan, rs)
                if s == ScenarioId.RANDOMIZED:
                    frozen = hp
            cells.append(cell)
    return cells


def _groups(plan: DecompositionPlan) -> list[tuple[int, int, tuple[ScenarioId, ...]]]:
    groups = []
    for ei in range(len(plan.estimators)):
        for r in plan.seeds:
            if plan.tune_per_scenario:
                groups.extend((ei, r, (s,)) for s in plan.scenarios)
            else:
                # randomized first so its selection can be reused
                rest = tuple(s for s in plan.scenarios if s != ScenarioId.RANDOMIZED)
                groups.append((ei, r, (ScenarioId.RANDOMIZED,) + rest))
    return groups


def _run_group_star(args):
    return _run_group(*args)


def dataset_diagnostics(plan: DecompositionPlan) -> dict:
    """Uniformity and confounding diagnostics of every scenario dataset."""
    from .evaluation import uniformity_diagnostic

    out = {}
    for r in plan.seeds:
        data = materialize_replication(plan.dgp, plan.root, r, plan.fractions, plan.order, plan.scenarios)
        for s, ds in data.items():
            dose = uniformity_diagnostic(ds.d)
            label = uniformity_diagnostic(ds.t, k=ds.space.k)
            out[f"{s.value}/{r}"] = {
                "dose_ks": dose.statistic, "dose_uniform": bool(dose.passed),
                "label_chi2": label.statistic, "label_uniform": bool(label.passed),
                "confounding": confounding_diagnostic(ds).to_dict(),
            }
    return out


def execute_plan(plan: DecompositionPlan, workers: int = 1, *, diagnostics: bool = False,
                 progress=None) -> DecompositionReport:
    """Run every cell; failures are recorded, never raised.

    Results do not depend on ``workers``: every cell derives its own seeds
    and BLAS runs single-threaded in each cell.
    """
    if len(plan) == 0:
        raise ValueError("empty plan")
    groups = _groups(plan)
    args = [(plan, ei, r, ss) for ei, r, ss in groups]
    results: list[list[RunCell]] = []
    if workers <= 1 or len(args) == 1:
        for a in args:
            results.append(_run_group_star(a))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
            for res in pool.map(_run_group_star, args):
                results.append(res)
                if progress:
                    progress(res)
    by_key = {c.key: c for group in results for c in group}
    cells = [by_key[(e.name, s.value, r)] for e, s, r in plan.cells()]
    report = DecompositionReport(plan, cells)
    if diagnostics:
        report.diagnostics = dataset_diagnostics(plan)
    return report


__all__ = [
    "DecompositionPlan", "DecompositionReport", "ORDERS", "RunCell", "build_plan", "dataset_diagnostics",
    "execute_plan", "materialize_replication", "materialize_scenario", "replication_seed",
    "scenario_vectors", "shuffle_vector",
]
