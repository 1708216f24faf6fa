"""Weighted-sum score objective and multi-start projected-gradient search.

The objective lives on the normalized joint setup u in [-1, 1]^6: per-arm
reachability and wall terms plus one coupled self-collision term, each an
SVR prediction clipped to [0, 1]. Clipping makes flat regions, so each
local ascent backtracks along the analytic gradient and starts are spread
uniformly over the box; results are deterministic for a given seed, with
ties broken by the lowest start index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import svr
from .svr import SvrModel
from .world import SetupPose, WorldLayout, denormalize_setup

_REQUIRED_MODELS = ("reach1", "reach2", "env1", "env2", "self")


@dataclass(frozen=True)
class ObjectiveSpec:
    w_reach: float
    w_self: float
    w_env: float
    models: dict[str, SvrModel]

    def __post_init__(self) -> None:
        if min(self.w_reach, self.w_self, self.w_env) < 0.0:
            raise ValueError("weights must be non-negative")
        if self.w_reach == self.w_self == self.w_env == 0.0:
            raise ValueError("weights must not all be zero")
        missing = [k for k in _REQUIRED_MODELS if k not in self.models]
        if missing:
            raise ValueError(f"missing score models: {missing}")

    @property
    def max_value(self) -> float:
        return 2.0 * self.w_reach + 2.0 * self.w_env + self.w_self


@dataclass(frozen=True)
class LocalSearchParams:
    max_iters: int = 500
    step0: float = 0.25
    grad_tol: float = 1e-6
    f_tol: float = 1e-8


@dataclass(frozen=True)
class Solution:
    u: tuple[float, ...]
    setup: SetupPose
    f: float
    per_score: dict[str, float]
    starts_used: int
    best_start: int


def _check_box(u: np.ndarray) -> None:
    if u.shape != (6,):
        raise ValueError("u must be a 6-vector")
    if np.max(np.abs(u)) > 1.0 + 1e-12:
        raise ValueError("u outside the [-1, 1] box")


def per_score_values(spec: ObjectiveSpec, u) -> dict[str, float]:
    """Clipped per-model scores at u."""
    u = np.asarray(u, float)
    _check_box(u)
    u1, u2 = u[:3], u[3:]
    return {
        "reach1": svr.clip_score(svr.predict(spec.models["reach1"], u1)),
        "reach2": svr.clip_score(svr.predict(spec.models["reach2"], u2)),
        "env1": svr.clip_score(svr.predict(spec.models["env1"], u1)),
        "env2": svr.clip_score(svr.predict(spec.models["env2"], u2)),
        "self": svr.clip_score(svr.predict(spec.models["self"], u)),
    }


def objective(spec: ObjectiveSpec, u) -> tuple[float, np.ndarray]:
    """Objective value and gradient; clipped terms contribute zero gradient."""
    u = np.asarray(u, float)
    _check_box(u)
    grad = np.zeros(6)
    value = 0.0
    terms = (
        ("reach1", spec.w_reach, slice(0, 3)),
        ("reach2", spec.w_reach, slice(3, 6)),
        ("env1", spec.w_env, slice(0, 3)),
        ("env2", spec.w_env, slice(3, 6)),
        ("self", spec.w_self, slice(0, 6)),
    )
    for name, weight, sl in terms:
        model = spec.models[name]
        x = u[sl]
        y = svr.predict(model, x)
        value += weight * svr.clip_score(y)
        if 0.0 < y < 1.0 and weight > 0.0:
            grad[sl] += weight * svr.gradient(model, x)
    return value, grad


def _project(u: np.ndarray) -> np.ndarray:
    return np.clip(u, -1.0, 1.0)


def _local_ascent(
    fg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    u0: np.ndarray,
    params: LocalSearchParams,
) -> tuple[np.ndarray, float]:
    u = _project(u0)
    f, g = fg(u)
    for _ in range(params.max_iters):
        projected_grad = _project(u + g) - u
        if np.max(np.abs(projected_grad)) <= params.grad_tol:
            break
        step = params.step0
        accepted = False
        while step > 1e-14:
            cand = _project(u + step * g)
            fc, gc = fg(cand)
            if fc > f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        gain = fc - f
        u, f, g = cand, fc, gc
        if gain < params.f_tol:
            break
    return u, f


def maximize_box(
    fg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    dim: int,
    n_starts: int,
    seed: int,
    params: LocalSearchParams = LocalSearchParams(),
) -> tuple[np.ndarray, float, int]:
    """Best of n_starts projected-gradient ascents on [-1, 1]^dim.

    Start k draws from its own stream seeded with (seed XOR k), so runs are
    reproducible regardless of evaluation order; exact ties go to the
    lowest start index.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    best_u: np.ndarray | None = None
    best_f = -np.inf
    best_k = -1
    for k in range(n_starts):
        rng = np.random.default_rng((seed ^ k) & 0x7FFFFFFFFFFFFFFF)
        u0 = rng.uniform(-1.0, 1.0, dim)
        _, g0 = fg(u0)
        if not np.any(g0):
            # Fully clipped plateau: nudge the start a few times.
            for _ in range(10):
                cand = _project(u0 + rng.uniform(-0.05, 0.05, dim))
                _, gc = fg(cand)
                if np.any(gc):
                    u0 = cand
                    break
        u, f = _local_ascent(fg, u0, params)
        if f > best_f:
            best_u, best_f, best_k = u, f, k
    assert best_u is not None
    return best_u, best_f, best_k


def multi_start_optimize(
    spec: ObjectiveSpec,
    layout: WorldLayout,
    n_starts: int = 100,
    seed: int = 0,
    params: LocalSearchParams = LocalSearchParams(),
) -> Solution:
    """Global search over the normalized setup box; deterministic under seed."""
    u, f, k = maximize_box(lambda v: objective(spec, v), 6, n_starts, seed, params)
    u_t = tuple(float(v) for v in u)
    return Solution(
        u=u_t,
        setup=denormalize_setup(u_t, layout),
        f=float(f),
        per_score=per_score_values(spec, u),
        starts_used=n_starts,
        best_start=k,
    )
