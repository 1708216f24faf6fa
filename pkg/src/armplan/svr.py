"""Gaussian-kernel epsilon-SVR over normalized base poses.

The dual is solved by sequential two-variable (SMO-style) updates with
maximal-violating-pair selection, stopping when the KKT violation drops
below kkt_tol. Predictions y(x) = sum_i c_i k(x, x_i) + b are smooth, and
the analytic gradient is exposed for the base-pose optimizer. Predicted
scores get clipped to [0, 1] before they enter the search objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .world import WorldLayout, normalize_base

_TAU = 1e-12


@dataclass(frozen=True)
class SvrParams:
    C: float = 10.0
    epsilon: float = 0.01
    gamma: float = 5.0
    kkt_tol: float = 1e-3
    max_passes: int = 10_000

    def __post_init__(self) -> None:
        if self.C <= 0 or self.epsilon < 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive, epsilon non-negative")
        if self.kkt_tol <= 0 or self.max_passes < 1:
            raise ValueError("kkt_tol must be positive and max_passes >= 1")


@dataclass(frozen=True)
class SvrModel:
    support_points: np.ndarray  # (m, dim)
    dual_coeffs: np.ndarray  # (m,), a_i - a_hat_i, |coeff| <= C
    bias: float
    gamma: float
    C: float
    epsilon: float

    @property
    def dim(self) -> int:
        return int(self.support_points.shape[1])

    @property
    def n_supports(self) -> int:
        return int(self.support_points.shape[0])


def _kernel_matrix(X: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    return np.exp(-gamma * d2)


def fit(features: np.ndarray, targets: Sequence[float], params: SvrParams = SvrParams()) -> SvrModel:
    """Solve the epsilon-SVR dual to the requested KKT tolerance."""
    X = np.asarray(features, float)
    t = np.asarray(targets, float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array")
    if X.shape[0] != t.shape[0]:
        raise ValueError("features and targets length mismatch")
    n = X.shape[0]
    if n < 2:
        raise ValueError("at least two training points are required")
    if np.max(np.abs(X)) > 1.0 + 1e-9:
        raise ValueError("features must be normalized to [-1, 1] per component")
    if np.allclose(X, X[0], atol=1e-12):
        raise ValueError("degenerate features: all training points identical")

    K = _kernel_matrix(X, params.gamma)
    C, eps, tol = params.C, params.epsilon, params.kkt_tol

    # Doubled variables: alpha[:n] are a_i, alpha[n:] are a_hat_i, all in [0, C].
    alpha = np.zeros(2 * n)
    y = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([eps - t, eps + t])
    KB = np.zeros(n)  # K @ (a - a_hat)

    m_val = M_val = 0.0
    for _ in range(params.max_passes):
        G = y * np.concatenate([KB, KB]) + p
        nyG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        m_val = float(np.max(nyG[up]))
        M_val = float(np.min(nyG[low]))
        if m_val - M_val <= tol:
            break
        i = int(np.argmax(np.where(up, nyG, -np.inf)))
        j = int(np.argmin(np.where(low, nyG, np.inf)))

        mi, mj = i % n, j % n
        qij = y[i] * y[j] * K[mi, mj]
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(2.0 + 2.0 * qij, _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = max(2.0 - 2.0 * qij, _TAU)
            delta = (G[i] - G[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        KB += (y[i] * (alpha[i] - old_i)) * K[:, mi]
        KB += (y[j] * (alpha[j] - old_j)) * K[:, mj]

    bias = 0.5 * (m_val + M_val)
    beta = alpha[:n] - alpha[n:]
    keep = np.flatnonzero(beta != 0.0)
    return SvrModel(
        support_points=X[keep].copy(),
        dual_coeffs=beta[keep].copy(),
        bias=float(bias),
        gamma=params.gamma,
        C=C,
        epsilon=eps,
    )


def _check_dim(model: SvrModel, X: np.ndarray) -> None:
    if model.n_supports and X.shape[-1] != model.dim:
        raise ValueError(f"query dim {X.shape[-1]} does not match model dim {model.dim}")


def predict_batch(model: SvrModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, float)
    if X.ndim != 2:
        raise ValueError("queries must be a 2-D array")
    _check_dim(model, X)
    if model.n_supports == 0:
        return np.full(X.shape[0], model.bias)
    S = model.support_points
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", S, S)[None, :]
        - 2.0 * X @ S.T
    )
    return np.exp(-model.gamma * np.maximum(d2, 0.0)) @ model.dual_coeffs + model.bias


def predict(model: SvrModel, x) -> float:
    """Kernel-expansion prediction at one point."""
    x = np.asarray(x, float)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    return float(predict_batch(model, x.reshape(1, -1))[0])


def gradient(model: SvrModel, x) -> np.ndarray:
    """Analytic d y / d x at one point."""
    x = np.asarray(x, float)
    if x.ndim != 1:
        raise ValueError("gradient takes a single feature vector")
    _check_dim(model, x.reshape(1, -1))
    if model.n_supports == 0:
        return np.zeros_like(x)
    diff = x[None, :] - model.support_points
    k = np.exp(-model.gamma * np.einsum("ij,ij->i", diff, diff))
    return (-2.0 * model.gamma) * ((model.dual_coeffs * k) @ diff)


def clip_score(y: float) -> float:
    """Truncate a predicted score to [0, 1]; idempotent and monotone."""
    return min(1.0, max(0.0, y))


SCORE_NAMES = ("reach1", "reach2", "env1", "env2", "self")


def _score_features(rows, layout: WorldLayout) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    u1 = np.array([normalize_base(r.setup.arm1, layout, 1) for r in rows])
    u2 = np.array([normalize_base(r.setup.arm2, layout, 2) for r in rows])
    u6 = np.hstack([u1, u2])
    return {
        "reach1": (u1, np.array([r.reach1 for r in rows])),
        "reach2": (u2, np.array([r.reach2 for r in rows])),
        "env1": (u1, np.array([r.env1 for r in rows])),
        "env2": (u2, np.array([r.env2 for r in rows])),
        "self": (u6, np.array([r.self_free for r in rows])),
    }


def fit_score_maps(
    rows,
    layout: WorldLayout,
    params: dict[str, SvrParams] | None = None,
    holdout_fraction: float = 0.0,
    holdout_seed: int = 0,
) -> tuple[dict[str, SvrModel], dict[str, float] | None]:
    """Fit the five score maps from dataset rows.

    With a positive holdout fraction, each map is first fitted on the
    remaining rows to measure holdout RMSE, then refitted on all rows for
    the returned model.
    """
    params = params or {}
    data = _score_features(rows, layout)
    models: dict[str, SvrModel] = {}
    rmse: dict[str, float] | None = None

    if holdout_fraction > 0.0:
        if not 0.0 < holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        n = len(rows)
        n_test = max(1, int(round(holdout_fraction * n)))
        perm = np.random.default_rng(holdout_seed).permutation(n)
        test_idx, train_idx = perm[:n_test], perm[n_test:]
        rmse = {}
        for name, (X, t) in data.items():
            par = params.get(name, SvrParams())
            m = fit(X[train_idx], t[train_idx], par)
            pred = predict_batch(m, X[test_idx])
            rmse[name] = float(np.sqrt(np.mean((pred - t[test_idx]) ** 2)))

    for name, (X, t) in data.items():
        models[name] = fit(X, t, params.get(name, SvrParams()))
    return models, rmse


def model_to_dict(model: SvrModel) -> dict:
    return {
        "dim": model.dim,
        "gamma": model.gamma,
        "C": model.C,
        "epsilon": model.epsilon,
        "bias": model.bias,
        "supports": model.support_points.tolist(),
        "coeffs": model.dual_coeffs.tolist(),
    }


def model_from_dict(doc: dict) -> SvrModel:
    supports = np.asarray(doc["supports"], float)
    coeffs = np.asarray(doc["coeffs"], float)
    if supports.size == 0:
        supports = supports.reshape(0, int(doc["dim"]))
    if supports.shape[0] != coeffs.shape[0]:
        raise ValueError("supports and coeffs length mismatch")
    return SvrModel(
        support_points=supports,
        dual_coeffs=coeffs,
        bias=float(doc["bias"]),
        gamma=float(doc["gamma"]),
        C=float(doc["C"]),
        epsilon=float(doc["epsilon"]),
    )


def save_model(model: SvrModel, path: str) -> None:
    from .artifacts import atomic_write_text

    atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def load_model(path: str) -> SvrModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid model file: {exc.msg}") from exc
    return model_from_dict(doc)
