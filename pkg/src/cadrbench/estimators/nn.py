"""Small numpy neural regressors: MLP, DRNet-lite and VCNet-lite.

All three share one training loop (Adam on minibatches, best validation
snapshot) and differ only in the network they build. Every network exposes
``forward``/``backward`` so gradients can be checked against finite
differences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import BSpline

from ..core import SeedTree, as_seed
from .base import EstimatorSpec, FeatureEncoding, Family, FitError, Rows


class ParamSet:
    """Named parameter arrays stored as views into one flat buffer."""

    def __init__(self, shapes: dict[str, tuple[int, ...]], flat: np.ndarray | None = None):
        self.shapes = dict(shapes)
        sizes = [math.prod(s) for s in self.shapes.values()]
        self.flat = np.zeros(sum(sizes)) if flat is None else flat
        self.views = {}
        offset = 0
        for (name, shape), size in zip(self.shapes.items(), sizes):
            self.views[name] = self.flat[offset:offset + size].reshape(shape)
            offset += size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.views[name]

    def like(self, flat: np.ndarray | None = None) -> "ParamSet":
        return ParamSet(self.shapes, np.zeros_like(self.flat) if flat is None else flat)

    def mask(self, names) -> np.ndarray:
        out = self.like()
        for name in names:
            out[name][...] = 1.0
        return out.flat


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[-2], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Trunk:
    """Stack of fully connected ReLU layers."""

    def __init__(self, n_in: int, hidden: int, layers: int, prefix: str = "trunk"):
        self.dims = [n_in] + [hidden] * layers
        self.prefix = prefix

    def names(self, i: int) -> tuple[str, str]:
        return f"{self.prefix}.W{i}", f"{self.prefix}.b{i}"

    def shapes(self) -> dict:
        out = {}
        for i in range(len(self.dims) - 1):
            w, b = self.names(i)
            out[w] = (self.dims[i], self.dims[i + 1])
            out[b] = (self.dims[i + 1],)
        return out

    def weights(self) -> list[str]:
        return [self.names(i)[0] for i in range(len(self.dims) - 1)]

    def forward(self, P: ParamSet, z: np.ndarray):
        acts, pre = [z], []
        for i in range(len(self.dims) - 1):
            w, b = self.names(i)
            a = acts[-1] @ P[w] + P[b]
            pre.append(a)
            acts.append(np.maximum(a, 0.0))
        return acts, pre

    def backward(self, P: ParamSet, G: ParamSet, acts, pre, g_top: np.ndarray) -> None:
        g = g_top
        for i in reversed(range(len(self.dims) - 1)):
            w, b = self.names(i)
            ga = g * (pre[i] > 0)
            G[w][...] += acts[i].T @ ga
            G[b][...] += ga.sum(axis=0)
            if i:
                g = ga @ P[w].T


class MLPNet:
    def __init__(self, m: int, k: int, hidden: int, layers: int):
        self.enc = FeatureEncoding(m, k)
        self.trunk = Trunk(self.enc.width, hidden, layers)
        self.hidden = hidden

    def shapes(self):
        return {**self.trunk.shapes(), "out.w": (self.hidden,), "out.b": (1,)}

    def decayed(self):
        return self.trunk.weights() + ["out.w"]

    def init(self, P: ParamSet, rng):
        for w in self.trunk.weights():
            P[w][...] = _glorot(rng, P[w].shape)
        P["out.w"][...] = _glorot(rng, (self.hidden, 1))[:, 0]

    def prepare(self, xs, t, d) -> dict:
        return {"z": np.hstack([xs, self.enc.onehot(t), d[:, None]])}

    def forward(self, P, data):
        acts, pre = self.trunk.forward(P, data["z"])
        out = acts[-1] @ P["out.w"] + P["out.b"][0]
        return out, (acts, pre)

    def backward(self, P, G, data, cache, g_out):
        acts, pre = cache
        G["out.w"][...] += acts[-1].T @ g_out
        G["out.b"][...] += g_out.sum()
        self.trunk.backward(P, G, acts, pre, np.outer(g_out, P["out.w"]))


class DRNetNet:
    """Shared covariate trunk plus one head per (intervention, dose stratum).

    A head sees the trunk output and the dose, has one ReLU layer and a
    scalar output. Dose ``d`` falls in stratum ``min(floor(d E), E - 1)``.
    """

    def __init__(self, m: int, k: int, hidden: int, layers: int, strata: int):
        self.m, self.k, self.strata, self.hidden = m, k, strata, hidden
        self.trunk = Trunk(m, hidden, layers)
        self.n_heads = k * strata

    def shapes(self):
        g, h = self.n_heads, self.hidden
        return {**self.trunk.shapes(), "head.V": (g, h + 1, h), "head.c": (g, h), "head.v": (g, h), "head.b": (g,)}

    def decayed(self):
        return self.trunk.weights() + ["head.V", "head.v"]

    def init(self, P, rng):
        for w in self.trunk.weights():
            P[w][...] = _glorot(rng, P[w].shape)
        P["head.V"][...] = _glorot(rng, P["head.V"].shape)
        P["head.v"][...] = _glorot(rng, (self.n_heads, self.hidden, 1))[..., 0]

    def head_index(self, t, d) -> np.ndarray:
        stratum = np.minimum(np.floor(np.asarray(d) * self.strata).astype(np.int64), self.strata - 1)
        return np.asarray(t, dtype=np.int64) * self.strata + np.maximum(stratum, 0)

    def prepare(self, xs, t, d) -> dict:
        return {"z": xs, "d": np.asarray(d, dtype=float), "g": self.head_index(t, d)}

    def forward(self, P, data):
        acts, pre = self.trunk.forward(P, data["z"])
        g = data["g"]
        u = np.hstack([acts[-1], data["d"][:, None]])
        V = P["head.V"][g]
        a = np.einsum("bi,bij->bj", u, V) + P["head.c"][g]
        r = np.maximum(a, 0.0)
        out = np.einsum("bj,bj->b", r, P["head.v"][g]) + P["head.b"][g]
        return out, (acts, pre, u, V, a, r)

    def backward(self, P, G, data, cache, g_out):
        acts, pre, u, V, a, r = cache
        g = data["g"]
        # scatter per-row gradients onto heads with a one-hot product (much faster than np.add.at)
        S = np.zeros((self.n_heads, len(g)))
        S[g, np.arange(len(g))] = 1.0
        G["head.v"][...] += S @ (r * g_out[:, None])
        G["head.b"][...] += S @ g_out
        ga = g_out[:, None] * P["head.v"][g] * (a > 0)
        G["head.c"][...] += S @ ga
        G["head.V"][...] += (S @ (u[:, :, None] * ga[:, None, :]).reshape(len(g), -1)).reshape(G["head.V"].shape)
        gu = np.einsum("bj,bij->bi", ga, V)
        self.trunk.backward(P, G, acts, pre, gu[:, :-1])


VC_KNOTS = (1 / 3, 2 / 3)
VC_DEGREE = 2


def bspline_basis(d, degree: int = VC_DEGREE, knots=VC_KNOTS) -> np.ndarray:
    """B-spline design matrix on [0, 1] with clamped ends; one row per dose."""
    t = np.concatenate([np.zeros(degree + 1), knots, np.ones(degree + 1)])
    d = np.clip(np.asarray(d, dtype=float), 0.0, 1.0)
    return BSpline.design_matrix(d, t, degree).toarray()


class VCNetNet:
    """Trunk on (x, one-hot t); output weights and bias are B-spline expansions in d."""

    def __init__(self, m: int, k: int, hidden: int, layers: int):
        self.enc = FeatureEncoding(m, k)
        self.trunk = Trunk(self.enc.width - 1, hidden, layers)
        self.hidden = hidden
        self.n_basis = len(VC_KNOTS) + VC_DEGREE + 1

    def shapes(self):
        return {**self.trunk.shapes(), "vc.W": (self.hidden, self.n_basis), "vc.c": (self.n_basis,)}

    def decayed(self):
        return self.trunk.weights() + ["vc.W"]

    def init(self, P, rng):
        for w in self.trunk.weights():
            P[w][...] = _glorot(rng, P[w].shape)
        P["vc.W"][...] = _glorot(rng, P["vc.W"].shape)

    def prepare(self, xs, t, d) -> dict:
        return {"z": np.hstack([xs, self.enc.onehot(t)]), "phi": bspline_basis(d)}

    def forward(self, P, data):
        acts, pre = self.trunk.forward(P, data["z"])
        coef = acts[-1] @ P["vc.W"] + P["vc.c"]
        out = np.einsum("bj,bj->b", coef, data["phi"])
        return out, (acts, pre)

    def backward(self, P, G, data, cache, g_out):
        acts, pre = cache
        gc = g_out[:, None] * data["phi"]
        G["vc.W"][...] += acts[-1].T @ gc
        G["vc.c"][...] += gc.sum(axis=0)
        self.trunk.backward(P, G, acts, pre, gc @ P["vc.W"].T)


def loss_and_grad(net, P: ParamSet, G: ParamSet, data: dict, y: np.ndarray, l2: float, decay_mask: np.ndarray):
    """Mean squared error plus ``l2/2 * |W|^2``; fills ``G`` with the gradient."""
    out, cache = net.forward(P, data)
    resid = out - y
    loss = float(resid @ resid) / len(y)
    G.flat[:] = 0.0
    net.backward(P, G, data, cache, 2.0 * resid / len(y))
    if l2:
        decayed = P.flat * decay_mask
        loss += 0.5 * l2 * float(decayed @ decayed)
        G.flat += l2 * decayed
    return loss


def _take(data: dict, idx) -> dict:
    return {key: val[idx] for key, val in data.items()}


class NeuralFamily(Family):
    """Shared Adam training loop with a kept best-validation snapshot.

    Covariates and targets are standardised with training statistics; the
    dose and one-hot intervention columns enter unscaled.
    """

    defaults = {
        "learning_rate": 1e-3,
        "l2": 0.0,
        "batch_size": 64,
        "hidden": 32,
        "layers": 2,
        "steps": 5000,
        "eval_every": 50,
    }

    def build_net(self, m: int, k: int):
        raise NotImplementedError

    def _fit(self, train, val, rng):
        hp = self.hp
        self.x_mean = train.x.mean(axis=0)
        sd = train.x.std(axis=0)
        self.x_std = np.where(sd > 0, sd, 1.0)
        self.y_mean = float(train.y.mean())
        ysd = float(train.y.std())
        self.y_std = ysd if ysd > 0 else 1.0
        self.net = self.build_net(self.enc.m, self.enc.k)
        P = ParamSet(self.net.shapes())
        self.net.init(P, rng)
        G = P.like()
        decay = P.mask(self.net.decayed())

        data = self.net.prepare(self._scale(train.x), train.t, train.d)
        y = (train.y - self.y_mean) / self.y_std
        vdata = vy = None
        if val is not None and len(val):
            vdata = self.net.prepare(self._scale(val.x), val.t, val.d)
            vy = (val.y - self.y_mean) / self.y_std

        lr, l2 = float(hp["learning_rate"]), float(hp["l2"])
        b1, b2, eps = 0.9, 0.999, 1e-8
        m1 = np.zeros_like(P.flat)
        m2 = np.zeros_like(P.flat)
        n = len(y)
        bs = min(int(hp["batch_size"]), n)
        steps = int(hp["steps"])
        every = max(1, int(hp["eval_every"]))
        perm, pos = rng.permutation(n), 0
        best_loss, best_flat, best_step = math.inf, P.flat.copy(), 0
        loss = math.nan
        for step in range(1, steps + 1):
            if pos + bs > n:
                perm, pos = rng.permutation(n), 0
            idx = perm[pos:pos + bs]
            pos += bs
            loss = loss_and_grad(self.net, P, G, _take(data, idx), y[idx], l2, decay)
            if not math.isfinite(loss) or not np.all(np.isfinite(G.flat)):
                raise FitError(
                    f"{self.family}: non-finite training loss at step {step}",
                    {"step": step, "loss": loss, "learning_rate": lr, "batch_size": bs},
                )
            m1 = b1 * m1 + (1 - b1) * G.flat
            m2 = b2 * m2 + (1 - b2) * G.flat ** 2
            corr = math.sqrt(1 - b2 ** step) / (1 - b1 ** step)
            P.flat -= lr * corr * m1 / (np.sqrt(m2) + eps)
            if vdata is not None and (step % every == 0 or step == steps):
                out, _ = self.net.forward(P, vdata)
                vloss = float(np.mean((out - vy) ** 2))
                if vloss < best_loss:
                    best_loss, best_flat, best_step = vloss, P.flat.copy(), step
        if vdata is not None:
            P.flat[:] = best_flat
        self.params = P
        self.meta.update(steps=steps, final_train_loss=loss * self.y_std ** 2,
                         best_step=best_step, best_val_loss=best_loss * self.y_std ** 2)

    def _scale(self, x):
        return (x - self.x_mean) / self.x_std

    def _predict(self, rows: Rows, chunk: int = 2048):
        out = np.empty(len(rows))
        for s in range(0, len(rows), chunk):
            part = rows.subset(slice(s, s + chunk))
            data = self.net.prepare(self._scale(part.x), part.t, part.d)
            out[s:s + chunk] = self.net.forward(self.params, data)[0]
        return out * self.y_std + self.y_mean


class MLP(NeuralFamily):
    family = "mlp"

    def build_net(self, m, k):
        return MLPNet(m, k, int(self.hp["hidden"]), int(self.hp["layers"]))


class DRNetLite(NeuralFamily):
    family = "drnet-lite"
    defaults = {**NeuralFamily.defaults, "strata": 10}

    def build_net(self, m, k):
        return DRNetNet(m, k, int(self.hp["hidden"]), int(self.hp["layers"]), int(self.hp["strata"]))


class VCNetLite(NeuralFamily):
    family = "vcnet-lite"
    defaults = {**NeuralFamily.defaults, "learning_rate": 1e-2, "batch_size": 128}

    def build_net(self, m, k):
        return VCNetNet(m, k, int(self.hp["hidden"]), int(self.hp["layers"]))


NEURAL = {"mlp": MLP, "drnet-lite": DRNetLite, "vcnet-lite": VCNetLite}


def mlp_gradient_check(
    spec: EstimatorSpec,
    batch: Rows,
    seed: SeedTree | int = 0,
    *,
    k: int = 1,
    n_params: int = 50,
    h: float = 1e-5,
    zero_init: bool = False,
) -> float:
    """Max relative error between backprop and central differences.

    Checks ``n_params`` randomly chosen parameters (all of them if there are
    fewer) of a freshly initialised network on ``batch``; the relative error
    uses ``max(|analytic|, |numeric|, 1e-6)`` as denominator.
    """
    family = NEURAL[spec.family](**spec.hyperparams)
    net = family.build_net(batch.x.shape[1], k)
    rng = as_seed(seed).rng()
    P = ParamSet(net.shapes())
    if not zero_init:
        net.init(P, rng)
    G = P.like()
    decay = P.mask(net.decayed())
    l2 = float(family.hp["l2"])
    data = net.prepare(batch.x, batch.t, batch.d)
    y = np.asarray(batch.y, dtype=float)
    loss_and_grad(net, P, G, data, y, l2, decay)
    analytic = G.flat.copy()
    scratch = P.like()
    picks = rng.choice(P.flat.size, size=min(n_params, P.flat.size), replace=False)
    worst = 0.0
    for i in picks:
        orig = P.flat[i]
        P.flat[i] = orig + h
        up = loss_and_grad(net, P, scratch, data, y, l2, decay)
        P.flat[i] = orig - h
        down = loss_and_grad(net, P, scratch, data, y, l2, decay)
        P.flat[i] = orig
        numeric = (up - down) / (2 * h)
        denom = max(abs(analytic[i]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


def analytic_gradient(spec: EstimatorSpec, batch: Rows, seed=0, *, k: int = 1, zero_init: bool = False) -> np.ndarray:
    family = NEURAL[spec.family](**spec.hyperparams)
    net = family.build_net(batch.x.shape[1], k)
    P = ParamSet(net.shapes())
    if not zero_init:
        net.init(P, as_seed(seed).rng())
    G = P.like()
    loss_and_grad(net, P, G, net.prepare(batch.x, batch.t, batch.d), np.asarray(batch.y, float),
                  float(family.hp["l2"]), P.mask(net.decayed()))
    return G.flat.copy()
