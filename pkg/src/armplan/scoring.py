"""Model-free scores: reachability, self- and environment-collision-free rates.

Reachability counts RoI voxel centers solvable by IK within joint limits.
Collision scores are Monte-Carlo proportions over uniformly sampled joint
configurations, computed either with the exact geometric checker or with
trained proxy classifiers. Rows are reproducible: the joint-sample stream
of row i is seeded with (seed XOR i), so serial and parallel generation
agree exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import fastron, kinematics
from .geometry import SetupChecker
from .kinematics import IkSettings, JointConfig
from .world import BasePose, SetupPose, WorldLayout

CSV_HEADER = "x1,y1,th1,x2,y2,th2,reach1,reach2,self_free,env1,env2"

DEFAULT_JOINT_SAMPLES = 1000


class DataError(ValueError):
    """Raised for malformed dataset files."""


@dataclass(frozen=True)
class CollisionScores:
    self_free: float
    env1: float
    env2: float


@dataclass(frozen=True)
class ScoreSample:
    setup: SetupPose
    reach1: float
    reach2: float
    self_free: float
    env1: float
    env2: float

    def row(self) -> tuple[float, ...]:
        a, b = self.setup.arm1, self.setup.arm2
        return (a.x, a.y, a.theta, b.x, b.y, b.theta,
                self.reach1, self.reach2, self.self_free, self.env1, self.env2)


@dataclass(frozen=True)
class ScoreDataset:
    rows: tuple[ScoreSample, ...]
    seed: int
    counts: dict


def voxel_centers(layout: WorldLayout) -> list[tuple[float, float, float]]:
    """RoI voxel centers in lexicographic (x, y, z) sweep order."""
    m = layout.voxel_count_per_axis
    cell = layout.roi_side / m
    lo = tuple(c - layout.roi_side / 2.0 for c in layout.roi_center)
    centers = []
    for i in range(m):
        for j in range(m):
            for k in range(m):
                centers.append((
                    lo[0] + (i + 0.5) * cell,
                    lo[1] + (j + 0.5) * cell,
                    lo[2] + (k + 0.5) * cell,
                ))
    return centers


def reachability_score(
    base: BasePose,
    layout: WorldLayout,
    arm: int,
    settings: IkSettings = IkSettings(),
) -> float:
    """Fraction of RoI voxel centers reachable within joint limits.

    IK for each voxel is warm-started from the previous voxel's solution,
    which roughly halves the iteration count on the lexicographic sweep.
    """
    q = kinematics.default_ik_init(layout)
    reached = 0
    centers = voxel_centers(layout)
    for target in centers:
        res = kinematics.solve_ik_dls(base, target, layout, arm, settings, q_init=q)
        q = res.q
        if res.converged and res.within_limits:
            reached += 1
    return reached / len(centers)


def _joint_bounds(layout: WorldLayout) -> tuple[np.ndarray, np.ndarray]:
    lims = layout.joint_limits.as_tuple()
    lo = np.array([l for l, _ in lims])
    hi = np.array([h for _, h in lims])
    return lo, hi


def draw_joint_samples(rng: np.random.Generator, layout: WorldLayout, n: int) -> np.ndarray:
    """(n, 3) uniform joint draws within limits, column order yaw/pitch/insertion."""
    lo, hi = _joint_bounds(layout)
    out = np.empty((n, 3))
    for j in range(3):
        out[:, j] = rng.uniform(lo[j], hi[j], n)
    return out


def normalize_joints(qs: np.ndarray, layout: WorldLayout) -> np.ndarray:
    lo, hi = _joint_bounds(layout)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return (qs - mid) / half


def env_feature_array(base: BasePose, layout: WorldLayout, arm: int, qs: np.ndarray) -> np.ndarray:
    """(n, 6) proxy features: normalized base pose followed by normalized joints."""
    from .world import normalize_base

    u = normalize_base(base, layout, arm)
    n = qs.shape[0]
    feats = np.empty((n, 6))
    feats[:, 0:3] = u
    feats[:, 3:6] = normalize_joints(qs, layout)
    return feats


def self_feature_array(setup: SetupPose, layout: WorldLayout, q1s: np.ndarray, q2s: np.ndarray) -> np.ndarray:
    """(n, 12) proxy features: both arms' normalized pose and joints."""
    f1 = env_feature_array(setup.arm1, layout, 1, q1s)
    f2 = env_feature_array(setup.arm2, layout, 2, q2s)
    return np.hstack([f1, f2])


def collision_scores(
    setup: SetupPose,
    layout: WorldLayout,
    checker: str = "geometric",
    n_samples: int = DEFAULT_JOINT_SAMPLES,
    seed: int = 0,
    proxy: "fastron.ProxyModels | None" = None,
    include_ecm: bool = True,
) -> CollisionScores:
    """Collision-free proportions over seeded uniform joint-configuration pairs.

    The two backends see identical samples for a given seed, so their
    scores are directly comparable.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if checker not in ("geometric", "fastron"):
        raise ValueError(f"unknown checker backend {checker!r}")
    rng = np.random.default_rng(seed)
    q1s = draw_joint_samples(rng, layout, n_samples)
    q2s = draw_joint_samples(rng, layout, n_samples)

    if checker == "fastron":
        if proxy is None:
            raise ValueError("fastron backend requires trained proxy models")
        e1 = fastron.predict_batch(proxy.env1, env_feature_array(setup.arm1, layout, 1, q1s))
        e2 = fastron.predict_batch(proxy.env2, env_feature_array(setup.arm2, layout, 2, q2s))
        sf = fastron.predict_batch(proxy.self_model, self_feature_array(setup, layout, q1s, q2s))
        return CollisionScores(
            self_free=float(np.mean(sf < 0)),
            env1=float(np.mean(e1 < 0)),
            env2=float(np.mean(e2 < 0)),
        )

    ck = SetupChecker(setup, layout, include_ecm=include_ecm)
    self_free = 0
    env1_free = 0
    env2_free = 0
    for i in range(n_samples):
        q1 = JointConfig(q1s[i, 0], q1s[i, 1], q1s[i, 2])
        q2 = JointConfig(q2s[i, 0], q2s[i, 1], q2s[i, 2])
        if not ck.self_collides(q1, q2):
            self_free += 1
        if not ck.env_collides(1, q1):
            env1_free += 1
        if not ck.env_collides(2, q2):
            env2_free += 1
    return CollisionScores(
        self_free=self_free / n_samples,
        env1=env1_free / n_samples,
        env2=env2_free / n_samples,
    )


def draw_setup(rng: np.random.Generator, layout: WorldLayout) -> SetupPose:
    poses = []
    for arm in (1, 2):
        g = layout.grid(arm)
        x = rng.uniform(*g.x_range)
        y = rng.uniform(*g.y_range)
        th = rng.uniform(-layout.theta_limit, layout.theta_limit)
        poses.append(BasePose(x, y, th))
    return SetupPose(arm1=poses[0], arm2=poses[1])


def _row_seed(seed: int, index: int) -> int:
    return (seed ^ index) & 0x7FFFFFFFFFFFFFFF


def generate_dataset(
    layout: WorldLayout,
    n_setups: int,
    checker: str = "geometric",
    seed: int = 0,
    n_samples: int = DEFAULT_JOINT_SAMPLES,
    proxy: "fastron.ProxyModels | None" = None,
    workers: int = 1,
) -> ScoreDataset:
    """Sampled setups with all five scores; deterministic under the seed."""
    if n_setups < 1:
        raise ValueError("n_setups must be at least 1")
    rng = np.random.default_rng(seed)
    setups = [draw_setup(rng, layout) for _ in range(n_setups)]

    def score_row(i: int) -> ScoreSample:
        setup = setups[i]
        col = collision_scores(
            setup, layout, checker=checker, n_samples=n_samples,
            seed=_row_seed(seed, i), proxy=proxy,
        )
        return ScoreSample(
            setup=setup,
            reach1=reachability_score(setup.arm1, layout, 1),
            reach2=reachability_score(setup.arm2, layout, 2),
            self_free=col.self_free,
            env1=col.env1,
            env2=col.env2,
        )

    if workers <= 1:
        rows = [score_row(i) for i in range(n_setups)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(score_row, range(n_setups)))

    counts = {
        "voxels": layout.voxel_count_per_axis ** 3,
        "joint_samples": n_samples,
        "setups": n_setups,
    }
    return ScoreDataset(rows=tuple(rows), seed=seed, counts=counts)


def dataset_csv_text(dataset: ScoreDataset) -> str:
    lines = [CSV_HEADER]
    for sample in dataset.rows:
        lines.append(",".join(format(v, ".9g") for v in sample.row()))
    return "\n".join(lines) + "\n"


def write_dataset_csv(dataset: ScoreDataset, path: str) -> None:
    from .artifacts import atomic_write_text

    atomic_write_text(path, dataset_csv_text(dataset))


def read_dataset_rows(path: str) -> list[ScoreSample]:
    """Parse a dataset CSV back into score samples."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise DataError(f"{path}: missing or unexpected CSV header")
    rows = []
    for ln_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 11:
            raise DataError(f"{path}:{ln_no}: expected 11 columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise DataError(f"{path}:{ln_no}: non-numeric field") from exc
        setup = SetupPose(
            arm1=BasePose(vals[0], vals[1], vals[2]),
            arm2=BasePose(vals[3], vals[4], vals[5]),
        )
        rows.append(ScoreSample(setup, *vals[6:]))
    if not rows:
        raise DataError(f"{path}: dataset has no rows")
    return rows


def score_mse(truth: Sequence[float], estimate: Sequence[float]) -> float:
    """Mean squared error between true and estimated score sequences."""
    if len(truth) != len(estimate):
        raise ValueError(f"length mismatch: {len(truth)} vs {len(estimate)}")
    if len(truth) == 0:
        raise ValueError("empty score sequences")
    t = np.asarray(truth, float)
    e = np.asarray(estimate, float)
    return float(np.mean((t - e) ** 2))


def generate_env_training(
    layout: WorldLayout, arm: int, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Labeled wall-collision samples for one arm's proxy model.

    Draws (base pose, joint config) uniformly; label +1 marks collision.
    """
    rng = np.random.default_rng(seed)
    g = layout.grid(arm)
    feats = np.empty((n, 6))
    labels = np.empty(n)
    qs = draw_joint_samples(rng, layout, n)
    xs = rng.uniform(*g.x_range, n)
    ys = rng.uniform(*g.y_range, n)
    ths = rng.uniform(-layout.theta_limit, layout.theta_limit, n)
    other = BasePose(layout.grid(3 - arm).center_x, layout.grid(3 - arm).center_y, 0.0)
    for i in range(n):
        base = BasePose(xs[i], ys[i], ths[i])
        setup = SetupPose(arm1=base, arm2=other) if arm == 1 else SetupPose(arm1=other, arm2=base)
        ck = SetupChecker(setup, layout, include_ecm=False)
        q = JointConfig(qs[i, 0], qs[i, 1], qs[i, 2])
        labels[i] = 1.0 if ck.env_collides(arm, q) else -1.0
        feats[i] = env_feature_array(base, layout, arm, qs[i:i + 1])[0]
    return feats, labels


def generate_self_training(layout: WorldLayout, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Labeled self-collision samples over the joint 12-D setup space."""
    rng = np.random.default_rng(seed)
    feats = np.empty((n, 12))
    labels = np.empty(n)
    q1s = draw_joint_samples(rng, layout, n)
    q2s = draw_joint_samples(rng, layout, n)
    for i in range(n):
        setup = draw_setup(rng, layout)
        ck = SetupChecker(setup, layout)
        q1 = JointConfig(q1s[i, 0], q1s[i, 1], q1s[i, 2])
        q2 = JointConfig(q2s[i, 0], q2s[i, 1], q2s[i, 2])
        labels[i] = 1.0 if ck.self_collides(q1, q2) else -1.0
        feats[i] = self_feature_array(setup, layout, q1s[i:i + 1], q2s[i:i + 1])[0]
    return feats, labels


def best_grid_reachability(
    layout: WorldLayout, arm: int, per_axis: int = 7, thetas: Iterable[float] = (-0.3, 0.0, 0.3)
) -> tuple[float, BasePose]:
    """Brute-force sweep for the best reachability on the arm's grid."""
    g = layout.grid(arm)
    best = (-1.0, BasePose(g.center_x, g.center_y, 0.0))
    for x in np.linspace(*g.x_range, per_axis):
        for y in np.linspace(*g.y_range, per_axis):
            for th in thetas:
                pose = BasePose(float(x), float(y), float(th))
                score = reachability_score(pose, layout, arm)
                if score > best[0]:
                    best = (score, pose)
    return best
