import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cadrbench.core import (
    CovariateMatrix, InterventionSpace, ScenarioDataset, ScenarioId, SeedTree, check_scenario, make_splits,
    scenario_order, validate_dataset,
)


def _dataset(**overrides):
    n = 10
    X = CovariateMatrix(("a", "b"), np.arange(20, dtype=float).reshape(n, 2))
    kw = dict(
        scenario=ScenarioId.RANDOMIZED, X=X, t=np.zeros(n, int), d=np.linspace(0, 1, n), y=np.ones(n),
        splits=make_splits(n, seed=0), space=InterventionSpace.of_size(2),
    )
    kw.update(overrides)
    return ScenarioDataset(**kw)


class TestCovariateMatrix:
    def test_shape_and_lookup(self):
        X = CovariateMatrix(("a", "b"), [[1.0, 0.0], [2.0, 1.0]], {"b"})
        assert X.shape == (2, 2)
        assert X.column("a").tolist() == [1.0, 2.0]
        assert X.take([1]).values.tolist() == [[2.0, 1.0]]

    def test_values_are_read_only(self):
        X = CovariateMatrix(("a",), [[1.0]])
        with pytest.raises(ValueError):
            X.values[0, 0] = 3.0

    @pytest.mark.parametrize(
        "names, values, binary",
        [
            (("a", "a"), [[1.0, 2.0]], ()),
            (("a",), [[np.nan]], ()),
            (("a",), [[0.5]], {"a"}),
            (("a",), [[1.0]], {"zz"}),
            (("a", "b"), [[1.0]], ()),
        ],
    )
    def test_invalid(self, names, values, binary):
        with pytest.raises(ValueError):
            CovariateMatrix(names, values, binary)


def test_intervention_space():
    space = InterventionSpace.of_size(3)
    assert space.k == 3 and len(set(space.labels)) == 3
    assert space.index(space.labels[2]) == 2
    with pytest.raises(ValueError):
        InterventionSpace(())
    with pytest.raises(ValueError):
        InterventionSpace(("a", "a"))


class TestScenarios:
    def test_order_and_reduction(self):
        assert [s.short for s in scenario_order(3)] == ["random.", "t non-unif.", "t conf.", "d non-unif.", "d conf."]
        assert scenario_order(1) == (ScenarioId.RANDOMIZED, ScenarioId.D_NONUNIFORM, ScenarioId.D_CONFOUNDED)
        assert scenario_order(3, "dose-first")[1] == ScenarioId.D_NONUNIFORM

    def test_single_intervention_rejects_t_scenarios(self):
        with pytest.raises(ValueError):
            check_scenario(ScenarioId.T_CONFOUNDED, 1)
        check_scenario(ScenarioId.T_CONFOUNDED, 2)


class TestSplits:
    def test_sizes(self):
        assert make_splits(10, (0.7, 0.1, 0.2), 1).sizes == (7, 1, 2)
        assert make_splits(3, (0.7, 0.1, 0.2), 1).sizes == (1, 1, 1)
        assert make_splits(747, seed=0).sizes == (524, 74, 149)

    def test_deterministic(self):
        assert make_splits(100, seed=SeedTree(5).child("s")) == make_splits(100, seed=SeedTree(5).child("s"))
        assert make_splits(100, seed=1) != make_splits(100, seed=2)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_degenerate(self, n):
        with pytest.raises(ValueError, match="degenerate split"):
            make_splits(n)

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            make_splits(10, (0.5, 0.1, 0.1))
        with pytest.raises(ValueError):
            make_splits(10, (1.0, 0.0, 0.0))

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(3, 10_000), seed=st.integers(0, 2**32))
    def test_partition_property(self, n, seed):
        sp = make_splits(n, seed=seed)
        idx = np.concatenate([sp.train, sp.val, sp.test])
        assert len(idx) == n
        assert np.array_equal(np.sort(idx), np.arange(n))
        assert sp.sizes[1] == max(1, int(0.1 * n + 1e-9)) and sp.sizes[2] == max(1, int(0.2 * n + 1e-9))


class TestSeedTree:
    def test_same_path_same_stream(self):
        a = SeedTree(9).child("dgp").child("dose", 3).rng().random(5)
        b = SeedTree(9).child("dgp").child("dose", 3).rng().random(5)
        assert np.array_equal(a, b)

    def test_adding_children_does_not_perturb_siblings(self):
        before = SeedTree(1).child("x").rng().random(3)
        SeedTree(1).child("y").rng().random(100)
        assert np.array_equal(before, SeedTree(1).child("x").rng().random(3))

    def test_sibling_streams_uncorrelated(self):
        L = 10_000
        root = SeedTree(123)
        streams = [root.child("s", i).rng().random(L) for i in range(4)] + [root.child("t").rng().random(L)]
        for i in range(len(streams)):
            for j in range(i + 1, len(streams)):
                assert abs(np.corrcoef(streams[i], streams[j])[0, 1]) < 4 / np.sqrt(L)

    def test_describe_and_bounds(self):
        assert SeedTree(3).child("a", 2).describe() == "3/a[2]"
        with pytest.raises(ValueError):
            SeedTree(-1)
        with pytest.raises(ValueError):
            SeedTree(0).child("a", -1)


class TestValidateDataset:
    def test_valid(self):
        assert validate_dataset(_dataset()) == []

    def test_dose_range(self):
        d = np.linspace(0, 1, 10)
        d[3] = 1.5
        report = validate_dataset(_dataset(d=d))
        assert len(report) == 1 and "dose range" in report[0]

    def test_unknown_label(self):
        t = np.zeros(10, int)
        t[0] = 7
        report = validate_dataset(_dataset(t=t))
        assert len(report) == 1 and "intervention label" in report[0]

    def test_non_finite_outcome_and_bad_scenario(self):
        y = np.ones(10)
        y[2] = np.inf
        report = validate_dataset(_dataset(y=y, scenario=ScenarioId.T_NONUNIFORM, space=InterventionSpace.of_size(1)))
        assert any("outcome" in r for r in report) and any("scenario" in r for r in report)

    def test_does_not_mutate(self):
        ds = _dataset()
        before = ds.d.copy()
        validate_dataset(ds)
        assert np.array_equal(ds.d, before)
