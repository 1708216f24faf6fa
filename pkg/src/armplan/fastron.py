"""Kernel-perceptron proxy collision classifier.

The decision value is a sparse kernel sum F(x) = sum_i alpha_i k(x_i, x)
with Gaussian kernel k(a, b) = exp(-gamma |a - b|^2); sign(F) is the
predicted collision status with the tie F = 0 counted as collision.
Training greedily fixes the worst-margin sample, biasing collision labels
by beta >= 1 so misses lean toward the safe side, then prunes supports
whose removal keeps their own margin positive.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

# Query chunk sized so the kernel block stays cache-resident.
_CHUNK = 512


@dataclass(frozen=True)
class LabeledConfigSet:
    """Feature vectors with +1 (collision) / -1 (free) labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, float)
        labels = np.asarray(self.labels, float)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if labels.shape != (feats.shape[0],):
            raise ValueError("labels length must match features")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class TrainParams:
    gamma: float = 10.0
    beta: float = 1.5
    max_updates: int = 5000
    max_supports: int = 3000

    def __post_init__(self) -> None:
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.beta < 1.0:
            raise ValueError("beta must be at least 1")
        if self.max_updates < 0 or self.max_supports < 1:
            raise ValueError("max_updates must be >= 0 and max_supports >= 1")


@dataclass(frozen=True)
class FastronModel:
    support_points: np.ndarray  # (n_support, dim), components in [-1, 1]
    alphas: np.ndarray  # (n_support,), all nonzero
    gamma: float
    beta: float
    max_supports: int

    @property
    def dim(self) -> int:
        return int(self.support_points.shape[1])

    @property
    def n_supports(self) -> int:
        return int(self.support_points.shape[0])


@dataclass(frozen=True)
class ProxyModels:
    """The three trained proxies used by the fastron scoring backend."""

    env1: FastronModel
    env2: FastronModel
    self_model: FastronModel


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    tpr: float
    tnr: float
    mean_query_time: float


def _kernel_column(X: np.ndarray, i: int, gamma: float) -> np.ndarray:
    diff = X - X[i]
    return np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))


def train(data: LabeledConfigSet, params: TrainParams = TrainParams()) -> FastronModel:
    """Fit the classifier by greedy worst-margin updates.

    Raises ValueError for single-class data ("degenerate labels").
    """
    X = data.features
    y = data.labels
    if len(data) == 0:
        raise ValueError("empty training set")
    if np.all(y > 0) or np.all(y < 0):
        raise ValueError("degenerate labels: both classes are required")

    n = len(data)
    alpha = np.zeros(n)
    F = np.zeros(n)
    updates = 0

    def apply_update(i: int, delta: float) -> None:
        nonlocal F
        alpha[i] += delta
        F += delta * _kernel_column(X, i, params.gamma)

    def prune_redundant() -> None:
        # Drop supports whose own margin stays positive without them.
        nonlocal F
        while True:
            sv = np.flatnonzero(alpha != 0.0)
            if sv.size == 0:
                return
            resid = y[sv] * (F[sv] - alpha[sv])
            best = int(np.argmax(resid))
            if resid[best] <= 0.0:
                return
            i = int(sv[best])
            F -= alpha[i] * _kernel_column(X, i, params.gamma)
            alpha[i] = 0.0

    while updates < params.max_updates:
        margins = y * F
        i = int(np.argmin(margins))
        if margins[i] > 0.0:
            prune_redundant()
            if np.min(y * F) > 0.0:
                break
            continue
        target = params.beta * y[i] if y[i] > 0 else y[i]
        if alpha[i] == 0.0 and int(np.count_nonzero(alpha)) >= params.max_supports:
            sv = np.flatnonzero(alpha != 0.0)
            resid = y[sv] * (F[sv] - alpha[sv])
            best = int(np.argmax(resid))
            if resid[best] <= 0.0:
                break  # support budget exhausted, nothing redundant to evict
            j = int(sv[best])
            F -= alpha[j] * _kernel_column(X, j, params.gamma)
            alpha[j] = 0.0
        apply_update(i, target - F[i])
        updates += 1
    else:
        prune_redundant()

    keep = np.flatnonzero(alpha != 0.0)
    return FastronModel(
        support_points=X[keep].copy(),
        alphas=alpha[keep].copy(),
        gamma=params.gamma,
        beta=params.beta,
        max_supports=params.max_supports,
    )


def decision_values(model: FastronModel, X: np.ndarray) -> np.ndarray:
    """Raw kernel sums F(x) for an (n, dim) query array."""
    X = np.asarray(X, float)
    if X.ndim != 2:
        raise ValueError("queries must be a 2-D array")
    if model.n_supports and X.shape[1] != model.dim:
        raise ValueError(f"query dim {X.shape[1]} does not match model dim {model.dim}")
    if model.n_supports == 0:
        return np.zeros(X.shape[0])
    # Single precision keeps the kernel matrix SIMD- and cache-friendly;
    # resulting decision values are accurate to ~1e-4, far below any
    # meaningful margin.
    S = model.support_points.astype(np.float32)
    alphas = model.alphas.astype(np.float32)
    s_sq = np.einsum("ij,ij->i", S, S)
    Xq = X.astype(np.float32)
    gamma = np.float32(model.gamma)
    out = np.empty(X.shape[0], np.float32)
    for start in range(0, Xq.shape[0], _CHUNK):
        chunk = Xq[start:start + _CHUNK]
        d2 = np.einsum("ij,ij->i", chunk, chunk)[:, None] + s_sq[None, :] - 2.0 * chunk @ S.T
        np.maximum(d2, 0.0, out=d2)
        d2 *= -gamma
        np.exp(d2, out=d2)
        out[start:start + _CHUNK] = d2 @ alphas
    return out.astype(np.float64)


def predict_batch(model: FastronModel, X: np.ndarray) -> np.ndarray:
    """Vector of +1 (collision) / -1 (free); F = 0 counts as collision."""
    F = decision_values(model, X)
    return np.where(F >= 0.0, 1, -1)


def predict(model: FastronModel, x) -> int:
    """Collision status of a single query point."""
    x = np.asarray(x, float)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    if model.n_supports and x.shape[0] != model.dim:
        raise ValueError(f"query dim {x.shape[0]} does not match model dim {model.dim}")
    return int(predict_batch(model, x.reshape(1, -1))[0])


def evaluate(model: FastronModel, data: LabeledConfigSet, timing_queries: int = 10_000) -> EvalReport:
    """Confusion-matrix rates (+1 positive) and mean per-query prediction time."""
    if len(data) == 0:
        raise ValueError("empty evaluation set")
    preds = predict_batch(model, data.features)
    y = data.labels
    pos = y > 0
    neg = ~pos
    accuracy = float(np.mean(preds == y))
    tpr = float(np.mean(preds[pos] == 1)) if pos.any() else float("nan")
    tnr = float(np.mean(preds[neg] == -1)) if neg.any() else float("nan")

    reps = max(1, -(-timing_queries // len(data)))
    queries = np.tile(data.features, (reps, 1))[:timing_queries] if reps > 1 else data.features
    t0 = time.perf_counter()
    predict_batch(model, queries)
    elapsed = time.perf_counter() - t0
    return EvalReport(accuracy, tpr, tnr, elapsed / queries.shape[0])


def model_to_dict(model: FastronModel) -> dict:
    return {
        "gamma": model.gamma,
        "beta": model.beta,
        "dim": model.dim,
        "supports": model.support_points.tolist(),
        "alphas": model.alphas.tolist(),
    }


def model_from_dict(doc: dict) -> FastronModel:
    supports = np.asarray(doc["supports"], float)
    alphas = np.asarray(doc["alphas"], float)
    if supports.size == 0:
        supports = supports.reshape(0, int(doc["dim"]))
    if supports.shape[0] != alphas.shape[0]:
        raise ValueError("supports and alphas length mismatch")
    return FastronModel(
        support_points=supports,
        alphas=alphas,
        gamma=float(doc["gamma"]),
        beta=float(doc["beta"]),
        max_supports=max(1, supports.shape[0]),
    )


def save_model(model: FastronModel, path: str) -> None:
    from .artifacts import atomic_write_text

    atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def load_model(path: str) -> FastronModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid model file: {exc.msg}") from exc
    return model_from_dict(doc)
