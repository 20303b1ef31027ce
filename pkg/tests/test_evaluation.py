import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cadrbench.core import CovariateMatrix, InterventionSpace, ScenarioDataset, ScenarioId, make_splits
from cadrbench.decomposition import materialize_replication
from cadrbench.dgp import FunctionSurface, make_dgp
from cadrbench.estimators import EstimatorSpec, Rows, fit
from cadrbench.evaluation import (
    DoseGrid, MetricError, abs_correlation, aggregate, confounding_diagnostic, dose_bin, dose_error_profile,
    factual_mse, mise, summarize, uniformity_diagnostic,
)


class Fn:
    """Prediction stub: ``fn(x, t, d)`` broadcast to the batch."""

    def __init__(self, fn):
        self.fn = fn

    def predict(self, x, t, d):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t), (len(x),))
        d = np.broadcast_to(np.asarray(d, dtype=float), (len(x),))
        return np.asarray(self.fn(x, t, d), dtype=float) + np.zeros(len(x))


class Truth(Fn):
    def __init__(self, surface):
        super().__init__(lambda x, t, d: surface(t, d, x))


LINEAR = FunctionSurface(lambda t, d, x: d + 0 * x[:, 0], k=1)
X5 = np.random.default_rng(0).random((5, 2))


class TestMise:
    def test_zero_predictor_against_identity(self):
        assert mise(Fn(lambda x, t, d: 0.0), LINEAR, X5, 1) == pytest.approx(1 / 3, abs=1e-4)

    def test_one_of_two_interventions_wrong(self):
        surf = FunctionSurface(lambda t, d, x: np.where(t == 0, d, 0.0) + 0 * x[:, 0], k=2)
        assert mise(Fn(lambda x, t, d: 0.0), surf, X5, 2) == pytest.approx(1 / 6, abs=1e-4)

    def test_perfect_predictor(self):
        dgp = make_dgp("tcga2-style", n=50, m=5, k=3, seed=1)
        assert mise(Truth(dgp.response), dgp.response, dgp.X, dgp.space) == 0.0

    def test_grid_refinement_converges(self):
        exact = 1 / 5  # integral of d^4
        surf = FunctionSurface(lambda t, d, x: d ** 2 + 0 * x[:, 0], k=1)
        zero = Fn(lambda x, t, d: 0.0)
        e65 = abs(mise(zero, surf, X5, 1, DoseGrid.uniform(65)) - exact)
        e129 = abs(mise(zero, surf, X5, 1, DoseGrid.uniform(129)) - exact)
        assert e129 < e65 / 3.5

    def test_monte_carlo_oracle(self):
        dgp = make_dgp("tcga2-style", n=40, m=5, k=2, seed=3)
        rng = np.random.default_rng(1)
        x = dgp.X.values
        t = rng.integers(0, 2, 400)
        d = rng.random(400)
        idx = rng.integers(0, 40, 400)
        model = fit(EstimatorSpec("ridge"), Rows(x[idx], t, d, dgp.response(t, d, x[idx])), None, 0, k=2)
        value = mise(model, dgp.response, dgp.X, dgp.space, DoseGrid.uniform(257))
        # independent estimate: average squared error at uniform random (unit, t, d) triples
        L = 400_000
        u, tt, dd = rng.integers(0, 40, L), rng.integers(0, 2, L), rng.random(L)
        mc = np.mean((dgp.response(tt, dd, x[u]) - model.predict(x[u], tt, dd)) ** 2)
        assert value == pytest.approx(mc, rel=0.02)

    def test_non_finite_predictions(self):
        with pytest.raises(MetricError):
            mise(Fn(lambda x, t, d: np.nan), LINEAR, X5, 1)

    def test_empty_test_set(self):
        with pytest.raises(MetricError):
            mise(Fn(lambda x, t, d: 0.0), LINEAR, np.zeros((0, 2)), 1)

    def test_bad_grid(self):
        for pts in ([0.5], [0.0, 0.5, 0.4], [-0.1, 1.0]):
            with pytest.raises(ValueError):
                DoseGrid(pts)


@pytest.fixture(scope="module")
def replication():
    dgp = make_dgp("tcga2-style", n=400, m=6, k=3, sigma=0.5, seed=0)
    return dgp, materialize_replication(dgp, 0, 0)


class TestFactual:
    def test_truth_predictor_sees_noise_only(self, replication):
        dgp, data = replication
        ds = data[ScenarioId.RANDOMIZED]
        x, t, d, y = ds.part("test")
        noise = y - dgp.response(t, d, x)
        assert factual_mse(Truth(dgp.response), ds) == pytest.approx(np.mean(noise ** 2), rel=1e-12)

    def test_constant_predictor(self, replication):
        _, data = replication
        ds = data[ScenarioId.D_CONFOUNDED]
        y = ds.part("val")[3]
        assert factual_mse(Fn(lambda x, t, d: 2.0), ds, "val") == pytest.approx(np.mean((y - 2.0) ** 2))


class TestProfile:
    def test_bins(self):
        assert dose_bin([0.0, 0.05, 0.1, 0.999, 1.0], 10).tolist() == [0, 0, 1, 9, 9]

    def test_perfect_model_and_counts(self, replication):
        dgp, data = replication
        ds = data[ScenarioId.D_NONUNIFORM]
        prof = dose_error_profile(Truth(dgp.response), dgp.response, ds, bins=10)
        assert prof.errors.shape == (3, 10) and np.all(prof.errors == 0)
        assert prof.train_counts.sum() == len(ds.splits.train)
        _, t, d, _ = ds.part("train")
        assert prof.train_counts[1, 0] == np.sum((t == 1) & (d < 0.1))

    def test_profile_averages_to_grid_error(self, replication):
        dgp, data = replication
        ds = data[ScenarioId.RANDOMIZED]
        prof = dose_error_profile(Fn(lambda x, t, d: 0.0), dgp.response, ds, bins=2, grid=DoseGrid.uniform(5))
        assert np.all(prof.errors > 0)
        assert prof.to_dict()["edges"] == [0.0, 0.5, 1.0]


class TestUniformity:
    @pytest.mark.parametrize("n", [10, 100, 1000])
    def test_midpoint_grid_ks(self, n):
        res = uniformity_diagnostic((np.arange(n) + 0.5) / n)
        assert res.statistic == pytest.approx(1 / (2 * n))
        assert res.passed

    def test_constant_doses_fail(self):
        res = uniformity_diagnostic(np.full(100, 0.5))
        assert res.statistic == pytest.approx(0.5) and not res.passed
        assert res.threshold == pytest.approx(0.1628)

    def test_labels(self):
        assert uniformity_diagnostic(np.zeros(30, int), k=1).statistic == 0.0
        assert uniformity_diagnostic(np.repeat([0, 1, 2], 100), k=3).passed
        skew = uniformity_diagnostic(np.repeat([0, 1, 2], [200, 50, 50]), k=3)
        assert skew.statistic == pytest.approx(150.0) and not skew.passed


class TestConfounding:
    def _ds(self, X, d, t=None, k=1):
        n = len(d)
        t = np.zeros(n, int) if t is None else t
        return ScenarioDataset(ScenarioId.RANDOMIZED, X, t, d, np.zeros(n), make_splits(n, seed=0),
                               InterventionSpace.of_size(k))

    def test_flags_dose_driver(self):
        rng = np.random.default_rng(0)
        d = rng.random(400)
        X = CovariateMatrix(("driver", "noise", "const"), np.column_stack([d, rng.random(400), np.ones(400)]))
        res = confounding_diagnostic(self._ds(X, d))
        assert res.flagged == ["driver"]
        assert res.dose_corr[0] == pytest.approx(1.0) and res.dose_corr[2] == 0.0
        assert res.threshold == pytest.approx(0.2)
        assert res.label_gaps is None

    def test_label_gap(self):
        t = np.repeat([0, 1], 50)
        X = CovariateMatrix(("a",), t[:, None] * 3.0)
        res = confounding_diagnostic(self._ds(X, np.linspace(0, 1, 100), t, k=2))
        assert res.label_gaps.tolist() == [3.0]

    def test_abs_correlation(self):
        assert abs_correlation(np.arange(5), -np.arange(5)) == pytest.approx(1.0)
        assert abs_correlation(np.ones(5), np.arange(5)) == 0.0


class TestAggregate:
    def test_examples(self):
        a = summarize([1, 1, 1])
        assert (a.mean, a.std, a.done) == (1.0, 0.0, 3)
        b = summarize([1, 2, 3])
        assert (b.mean, b.std) == (2.0, 1.0)
        assert summarize([4.0]).std == 0.0
        assert math.isnan(summarize([], failed=2).mean)

    def test_failed_cells_counted(self):
        cells = [
            {"estimator": "a", "scenario": "randomized", "status": "done", "mise": 1.0},
            {"estimator": "a", "scenario": "randomized", "status": "failed", "mise": None},
            {"estimator": "a", "scenario": "randomized", "status": "done", "mise": 3.0},
            {"estimator": "b", "scenario": "randomized", "status": "done", "mise": 5.0},
        ]
        agg = aggregate(cells)
        assert agg[("a", "randomized")].mean == 2.0 and agg[("a", "randomized")].failed == 1
        assert "2 of 3" in agg[("a", "randomized")].note
        assert agg[("b", "randomized")].count == 1

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant(self, vals, rnd):
        shuffled = list(vals)
        rnd.shuffle(shuffled)
        a, b = summarize(vals), summarize(shuffled)
        assert a.mean == b.mean
        assert a.std == pytest.approx(b.std, rel=1e-9, abs=1e-9)
        assert a.std == pytest.approx(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0, rel=1e-6, abs=1e-6)
