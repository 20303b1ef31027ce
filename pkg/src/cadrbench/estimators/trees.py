"""Regression trees with exact variance-reduction splits, and gradient boosting on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import Family, Rows


@dataclass(frozen=True)
class Split:
    gain: float
    feature: int
    threshold: float


def best_split(X: np.ndarray, y: np.ndarray, features=None, min_leaf: int = 1) -> Split | None:
    """Best variance-reduction split over ``features``.

    Gain is the drop in the sum of squared errors. Thresholds are midpoints
    between consecutive distinct values; rows with ``x <= threshold`` go
    left. Ties resolve to the lowest feature, then the lowest threshold.
    """
    n = len(y)
    if n < 2 * min_leaf or n < 2:
        return None
    features = np.arange(X.shape[1]) if features is None else np.asarray(features)
    Xf = X[:, features]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    ys = y[order]
    total = y.sum()
    left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)[:, None]
    gain = left ** 2 / n_left + (total - left) ** 2 / (n - n_left) - total ** 2 / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    flat = gain.T.ravel()
    j = int(np.argmax(flat))
    if not np.isfinite(flat[j]):
        return None
    fi, pos = divmod(j, n - 1)
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return Split(float(flat[j]), int(features[fi]), float(thr))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.arange(len(X))
        while len(active):
            f = self.feature[node[active]]
            internal = f >= 0
            active, f = active[internal], f[internal]
            if not len(active):
                break
            cur = node[active]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_depth: int | None = None,
    min_split: int = 2,
    min_leaf: int = 1,
    max_features: int | None = None,
    min_gain: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy top-down CART growth.

    ``max_features`` draws that many candidate features per node (needs
    ``rng``); ``None`` considers all of them.
    """
    n, p = X.shape
    max_depth = math.inf if max_depth is None else max_depth
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(value) - 1

    stack = [(np.arange(n), 0, new_node(np.arange(n)))]
    while stack:
        idx, depth, node = stack.pop()
        if depth >= max_depth or len(idx) < max(min_split, 2 * min_leaf, 2):
            continue
        feats = None
        if max_features is not None and max_features < p:
            feats = np.sort(rng.choice(p, size=max_features, replace=False))
        yi = y[idx]
        split = best_split(X[idx], yi, feats, min_leaf)
        tol = 1e-12 * (1.0 + float(yi @ yi))
        if split is None or split.gain <= max(min_gain, tol):
            continue
        go_left = X[idx, split.feature] <= split.threshold
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((ri, depth + 1, right[node]))
        stack.append((li, depth + 1, left[node]))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value))


def _max_features(setting, p: int) -> int | None:
    if setting is None:
        return None
    if setting == "sqrt":
        return max(1, int(math.sqrt(p)))
    return max(1, min(p, int(setting)))


class RegressionTree(Family):
    family = "cart"
    defaults = {"max_depth": None, "min_split": 2, "min_leaf": 1, "max_features": None}

    def _fit(self, train, val, rng):
        Z = self.enc.encode(train.x, train.t, train.d)
        self.tree = build_tree(
            Z, train.y,
            max_depth=self.hp["max_depth"],
            min_split=int(self.hp["min_split"]),
            min_leaf=int(self.hp["min_leaf"]),
            max_features=_max_features(self.hp["max_features"], Z.shape[1]),
            rng=rng,
        )
        self.meta["n_nodes"] = self.tree.n_nodes

    def _predict(self, rows: Rows):
        return self.tree.predict(self.enc.encode(rows.x, rows.t, rows.d))


class GradientBoostedTrees(Family):
    """Least-squares boosting: each tree fits the current residuals.

    ``min_child_weight`` is the minimum leaf size (unit hessians) and
    ``gamma`` the minimum loss reduction, with the loss taken as half the
    squared error.
    """

    family = "gbt"
    defaults = {
        "learning_rate": 0.1,
        "max_depth": 5,
        "subsample": 1.0,
        "min_child_weight": 1,
        "gamma": 0.0,
        "colsample": 1.0,
        "n_estimators": 100,
    }

    def _fit(self, train, val, rng):
        hp = self.hp
        Z = self.enc.encode(train.x, train.t, train.d)
        y = train.y
        n, p = Z.shape
        self.base = float(y.mean())
        F = np.full(n, self.base)
        self.trees: list[Tree] = []
        self.train_loss = [float(np.mean((y - F) ** 2))]
        n_rows = max(1, int(math.ceil(hp["subsample"] * n)))
        n_cols = max(1, int(round(hp["colsample"] * p)))
        for _ in range(int(hp["n_estimators"])):
            rows = np.arange(n) if n_rows >= n else np.sort(rng.choice(n, size=n_rows, replace=False))
            cols = np.arange(p) if n_cols >= p else np.sort(rng.choice(p, size=n_cols, replace=False))
            resid = y[rows] - F[rows]
            tree = build_tree(
                Z[np.ix_(rows, cols)], resid,
                max_depth=hp["max_depth"],
                min_leaf=int(hp["min_child_weight"]),
                min_gain=2.0 * float(hp["gamma"]),
            )
            internal = tree.feature >= 0
            tree.feature[internal] = cols[tree.feature[internal]]
            tree.value *= hp["learning_rate"]
            self.trees.append(tree)
            F += tree.predict(Z)
            self.train_loss.append(float(np.mean((y - F) ** 2)))
        self.meta["final_train_loss"] = self.train_loss[-1]

    def _predict(self, rows: Rows):
        Z = self.enc.encode(rows.x, rows.t, rows.d)
        out = np.full(len(Z), self.base)
        for tree in self.trees:
            out += tree.predict(Z)
        return out
