"""Ridge regression and the unpenalized spline additive model."""

from __future__ import annotations

import numpy as np

from .base import Family, Rows


def ridge_solve(Z: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Closed-form ridge with an unpenalized intercept.

    Solves ``(Zc'Zc + lam I) b = Zc'yc`` on centred data; ``lam == 0`` falls
    back to the minimum-norm least-squares solution so collinear one-hot
    columns do not break the fit.
    """
    zm = Z.mean(axis=0)
    ym = y.mean()
    Zc = Z - zm
    yc = y - ym
    if lam > 0:
        coef = np.linalg.solve(Zc.T @ Zc + lam * np.eye(Z.shape[1]), Zc.T @ yc)
    else:
        coef = np.linalg.lstsq(Zc, yc, rcond=None)[0]
    return coef, float(ym - zm @ coef)


class Ridge(Family):
    family = "ridge"
    defaults = {"lam": 0.0}

    def _fit(self, train, val, rng):
        if self.hp["lam"] < 0:
            raise ValueError("ridge: lam must be >= 0")
        Z = self.enc.encode(train.x, train.t, train.d)
        self.coef, self.intercept = ridge_solve(Z, train.y, float(self.hp["lam"]))

    def _predict(self, rows: Rows):
        return self.enc.encode(rows.x, rows.t, rows.d) @ self.coef + self.intercept


def truncated_power_basis(u: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Cubic truncated-power basis ``u, u^2, u^3, (u - k_j)_+^3`` (no intercept)."""
    cols = [u, u ** 2, u ** 3]
    cols.extend(np.maximum(u - kn, 0.0) ** 3 for kn in knots)
    return np.column_stack(cols)


class SplineAdditive(Family):
    """Additive model: one cubic spline per encoded feature, fitted by least squares.

    Features with at most two distinct training values enter linearly.
    Inputs are min-max scaled on the training data and clipped to it at
    prediction time.
    """

    family = "spline-additive"
    defaults = {"n_knots": 8}

    def _fit(self, train, val, rng):
        Z = self.enc.encode(train.x, train.t, train.d)
        self.lo = Z.min(axis=0)
        self.span = np.where(Z.max(axis=0) > self.lo, Z.max(axis=0) - self.lo, 1.0)
        U = (Z - self.lo) / self.span
        n_knots = int(self.hp["n_knots"])
        levels = np.arange(1, n_knots + 1) / (n_knots + 1)
        self.knots = []
        for j in range(Z.shape[1]):
            if len(np.unique(U[:, j])) <= 2:
                self.knots.append(None)
                continue
            kn = np.unique(np.quantile(U[:, j], levels))
            self.knots.append(kn[(kn > 0) & (kn < 1)])
        B = self._design(U)
        self.coef = np.linalg.lstsq(B, train.y, rcond=None)[0]
        self.meta["n_basis"] = B.shape[1]

    def _design(self, U):
        blocks = [np.ones((len(U), 1))]
        for j, kn in enumerate(self.knots):
            blocks.append(U[:, [j]] if kn is None else truncated_power_basis(U[:, j], kn))
        return np.hstack(blocks)

    def _predict(self, rows):
        Z = self.enc.encode(rows.x, rows.t, rows.d)
        U = np.clip((Z - self.lo) / self.span, 0.0, 1.0)
        return self._design(U) @ self.coef
