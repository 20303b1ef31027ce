"""Domain types, dataset validation and deterministic seeding/splitting."""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DOSE_LO = 0.0
DOSE_HI = 1.0


def _freeze(arr) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class CovariateMatrix:
    """n x m covariate table with named columns.

    ``binary_cols`` lists the column names known to take values in {0, 1}.
    """

    names: tuple[str, ...]
    values: np.ndarray
    binary_cols: frozenset[str] = frozenset()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("covariate values must be a 2-d matrix")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "binary_cols", frozenset(self.binary_cols))
        n, m = values.shape
        if n < 1 or m < 1:
            raise ValueError(f"covariate matrix must be at least 1x1, got {n}x{m}")
        if len(self.names) != m:
            raise ValueError(f"{len(self.names)} column names for {m} columns")
        if len(set(self.names)) != m:
            raise ValueError("duplicate column names")
        if not np.all(np.isfinite(values)):
            raise ValueError("covariate matrix contains non-finite values")
        unknown = self.binary_cols - set(self.names)
        if unknown:
            raise ValueError(f"binary columns not in matrix: {sorted(unknown)}")
        for name in self.binary_cols:
            col = values[:, self.names.index(name)]
            if not np.all((col == 0) | (col == 1)):
                raise ValueError(f"column {name!r} is flagged binary but has values outside {{0, 1}}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows) -> "CovariateMatrix":
        return CovariateMatrix(self.names, self.values[rows], self.binary_cols)


@dataclass(frozen=True)
class InterventionSpace:
    labels: tuple[str, ...] = ("w1",)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 1:
            raise ValueError("intervention space needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("intervention labels must be distinct")

    @classmethod
    def of_size(cls, k: int) -> "InterventionSpace":
        return cls(tuple(f"w{i + 1}" for i in range(k)))

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown intervention label {label!r}") from None


@dataclass(frozen=True)
class DoseSpace:
    lo: float = DOSE_LO
    hi: float = DOSE_HI

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("dose space needs lo < hi")


class ScenarioId(str, enum.Enum):
    RANDOMIZED = "randomized"
    T_NONUNIFORM = "t_nonuniform"
    T_CONFOUNDED = "t_confounded"
    D_NONUNIFORM = "d_nonuniform"
    D_CONFOUNDED = "d_confounded"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @property
    def involves_interventions(self) -> bool:
        return self in (ScenarioId.T_NONUNIFORM, ScenarioId.T_CONFOUNDED)


_SHORT = {
    ScenarioId.RANDOMIZED: "random.",
    ScenarioId.T_NONUNIFORM: "t non-unif.",
    ScenarioId.T_CONFOUNDED: "t conf.",
    ScenarioId.D_NONUNIFORM: "d non-unif.",
    ScenarioId.D_CONFOUNDED: "d conf.",
}

TREATMENT_FIRST = (
    ScenarioId.RANDOMIZED,
    ScenarioId.T_NONUNIFORM,
    ScenarioId.T_CONFOUNDED,
    ScenarioId.D_NONUNIFORM,
    ScenarioId.D_CONFOUNDED,
)
DOSE_FIRST = (
    ScenarioId.RANDOMIZED,
    ScenarioId.D_NONUNIFORM,
    ScenarioId.D_CONFOUNDED,
    ScenarioId.T_NONUNIFORM,
    ScenarioId.T_CONFOUNDED,
)


def scenario_order(k: int, order: str = "treatment-first") -> tuple[ScenarioId, ...]:
    """Scenario sequence for a DGP with ``k`` interventions.

    Single-intervention DGPs drop both intervention scenarios.
    """
    if order == "treatment-first":
        seq = TREATMENT_FIRST
    elif order == "dose-first":
        seq = DOSE_FIRST
    else:
        raise ValueError(f"unknown decomposition order {order!r}")
    if k == 1:
        seq = tuple(s for s in seq if not s.involves_interventions)
    return seq


def check_scenario(scenario: ScenarioId, k: int) -> None:
    if k == 1 and scenario.involves_interventions:
        raise ValueError(f"scenario {scenario.value} is undefined for a single-intervention DGP")


_LABEL_CACHE: dict[str, int] = {}


def _label_key(label: str) -> int:
    key = _LABEL_CACHE.get(label)
    if key is None:
        key = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "little")
        _LABEL_CACHE[label] = key
    return key


@dataclass(frozen=True)
class SeedTree:
    """Root seed plus a labelled derivation path.

    Children are addressed by ``(label, index)`` pairs, so adding new
    consumers never shifts the streams of existing ones.
    """

    root: int
    path: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.root) < 2**64:
            raise ValueError("root seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "root", int(self.root))

    def child(self, label: str, index: int = 0) -> "SeedTree":
        if index < 0:
            raise ValueError("seed path index must be non-negative")
        return SeedTree(self.root, self.path + ((label, int(index)),))

    def seed_sequence(self) -> np.random.SeedSequence:
        key: list[int] = []
        for label, index in self.path:
            key.extend((_label_key(label), index))
        return np.random.SeedSequence(self.root, spawn_key=tuple(key))

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def as_int(self) -> int:
        """A 64-bit integer seed for consumers outside numpy."""
        return int(self.seed_sequence().generate_state(1, dtype=np.uint64)[0])

    def describe(self) -> str:
        parts = [str(self.root)] + [f"{label}[{index}]" for label, index in self.path]
        return "/".join(parts)


def as_seed(seed: SeedTree | int) -> SeedTree:
    return seed if isinstance(seed, SeedTree) else SeedTree(int(seed))


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, _freeze(np.sort(np.asarray(getattr(self, name), dtype=np.int64))))

    @property
    def n(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def __eq__(self, other):
        if not isinstance(other, SplitIndices):
            return NotImplemented
        return all(np.array_equal(getattr(self, s), getattr(other, s)) for s in ("train", "val", "test"))

    def __getitem__(self, which: str) -> np.ndarray:
        if which not in ("train", "val", "test"):
            raise KeyError(which)
        return getattr(self, which)


def make_splits(n: int, fractions: Sequence[float] = (0.7, 0.1, 0.2), seed: SeedTree | int = 0) -> SplitIndices:
    """Random train/val/test partition of ``range(n)``.

    Validation and test sizes are ``floor(fraction * n)`` (at least one
    unit each); the remainder goes to training.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fractions)!r}")
    if n < 3:
        raise ValueError(f"degenerate split: n={n} cannot fill three partitions")
    n_val = max(1, math.floor(fractions[1] * n + 1e-9))
    n_test = max(1, math.floor(fractions[2] * n + 1e-9))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ValueError(f"degenerate split: n={n} with fractions {tuple(fractions)}")
    perm = as_seed(seed).rng().permutation(n)
    return SplitIndices(perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


@dataclass(frozen=True, eq=False)
class ScenarioDataset:
    """One materialized observational dataset (X, T, D, Y).

    Interventions are stored as 0-based indices into ``space.labels``.
    """

    scenario: ScenarioId
    X: CovariateMatrix
    t: np.ndarray
    d: np.ndarray
    y: np.ndarray
    splits: SplitIndices
    space: InterventionSpace
    seed_record: tuple = ()
    mu: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "t", _freeze(np.asarray(self.t, dtype=np.int64)))
        object.__setattr__(self, "d", _freeze(np.asarray(self.d, dtype=float)))
        object.__setattr__(self, "y", _freeze(np.asarray(self.y, dtype=float)))
        if self.mu is not None:
            object.__setattr__(self, "mu", _freeze(np.asarray(self.mu, dtype=float)))

    @property
    def n(self) -> int:
        return self.X.n

    def part(self, which: str):
        """Return ``(x, t, d, y)`` arrays restricted to one split."""
        idx = self.splits[which]
        return self.X.values[idx], self.t[idx], self.d[idx], self.y[idx]


def validate_dataset(ds: ScenarioDataset) -> list[str]:
    """List every violated dataset invariant; empty when valid."""
    problems = []
    n = ds.X.n
    for name in ("t", "d", "y"):
        vec = getattr(ds, name)
        if vec.shape != (n,):
            problems.append(f"{name}: length {vec.shape} does not match n={n}")
    d = np.asarray(ds.d, dtype=float)
    bad_d = ~np.isfinite(d) | (d < DOSE_LO) | (d > DOSE_HI)
    if bad_d.any():
        problems.append(f"dose range: {int(bad_d.sum())} doses outside [0, 1]")
    t = np.asarray(ds.t)
    bad_t = (t < 0) | (t >= ds.space.k)
    if bad_t.any():
        problems.append(f"intervention label: {int(bad_t.sum())} entries not in {list(ds.space.labels)}")
    if not np.all(np.isfinite(ds.y)):
        problems.append("outcome: non-finite values in y")
    sp = ds.splits
    all_idx = np.concatenate([sp.train, sp.val, sp.test])
    if len(all_idx) != n or not np.array_equal(np.sort(all_idx), np.arange(n)):
        problems.append("splits: train/val/test do not partition the units")
    if ds.scenario.involves_interventions and ds.space.k == 1:
        problems.append(f"scenario: {ds.scenario.value} invalid for a single intervention")
    return problems
