"""Canonical circular trajectories and trajectory-based setup grading.

Nine circles inside the region of interest (seven z-normal circles at the
center and six axis offsets, plus an x-normal and a y-normal circle at the
center) are tracked waypoint by waypoint with warm-started IK. A waypoint
counts as reachable when the solved tip lands within 3 mm of the target,
inside the RoI, with joints inside their limits; collision flags come from
the exact geometric checker, never the learned proxy. While one arm tracks
the trajectory the other holds its nominal configuration aimed at the RoI
center, and per-waypoint flags are AND-ed across the two arm passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics
from .geometry import SetupChecker
from .kinematics import IkSettings, JointConfig, Vec3
from .world import ConfigError, SetupPose, WorldLayout

# Positional tolerance for a waypoint to count as reached: half of 6 mm.
REACH_TOLERANCE = 0.003

TRAJECTORY_RADIUS = 0.014
TRAJECTORY_OFFSET = 0.015
WAYPOINTS_PER_TRAJECTORY = 24


@dataclass(frozen=True)
class Trajectory:
    center: Vec3
    normal: Vec3
    radius: float
    n_waypoints: int

    def waypoints(self) -> list[Vec3]:
        nx, ny, nz = self.normal
        # Deterministic in-plane frame.
        ref = (0.0, 0.0, 1.0) if abs(nz) < 0.9 else (1.0, 0.0, 0.0)
        e1 = np.cross(self.normal, ref)
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(np.asarray(self.normal, float), e1)
        pts = []
        for k in range(self.n_waypoints):
            phi = 2.0 * math.pi * k / self.n_waypoints
            p = np.asarray(self.center, float) + self.radius * (math.cos(phi) * e1 + math.sin(phi) * e2)
            pts.append((float(p[0]), float(p[1]), float(p[2])))
        return pts


@dataclass(frozen=True)
class WaypointResult:
    reachable: bool
    self_free: bool
    env_free: bool
    q_used: JointConfig


@dataclass(frozen=True)
class TrajectoryReport:
    reach_mean: float
    reach_std: float
    self_mean: float
    self_std: float
    env_mean: float
    env_std: float
    combined: float
    per_trajectory: tuple[tuple[float, float, float], ...]

    def rows(self) -> list[tuple[str, float, float]]:
        return [
            ("Reachability", self.reach_mean, self.reach_std),
            ("Self-Collision-Free", self.self_mean, self.self_std),
            ("Environment-Collision-Free", self.env_mean, self.env_std),
        ]


def _inside_roi(p: Vec3, layout: WorldLayout, tol: float = 1e-9) -> bool:
    half = layout.roi_side / 2.0 + tol
    c = layout.roi_center
    return abs(p[0] - c[0]) <= half and abs(p[1] - c[1]) <= half and abs(p[2] - c[2]) <= half


def canonical_trajectories(layout: WorldLayout) -> list[Trajectory]:
    """The nine evaluation circles; raises ConfigError if the RoI is too small."""
    cx, cy, cz = layout.roi_center
    r = TRAJECTORY_RADIUS
    off = TRAJECTORY_OFFSET
    n = WAYPOINTS_PER_TRAJECTORY
    z_up = (0.0, 0.0, 1.0)
    trajs = [
        Trajectory((cx, cy, cz), z_up, r, n),
        Trajectory((cx + off, cy, cz), z_up, r, n),
        Trajectory((cx - off, cy, cz), z_up, r, n),
        Trajectory((cx, cy + off, cz), z_up, r, n),
        Trajectory((cx, cy - off, cz), z_up, r, n),
        Trajectory((cx, cy, cz + off), z_up, r, n),
        Trajectory((cx, cy, cz - off), z_up, r, n),
        Trajectory((cx, cy, cz), (1.0, 0.0, 0.0), r, n),
        Trajectory((cx, cy, cz), (0.0, 1.0, 0.0), r, n),
    ]
    for t in trajs:
        for wp in t.waypoints():
            if not _inside_roi(wp, layout):
                raise ConfigError(
                    f"trajectory waypoint {wp} falls outside the region of interest; "
                    f"roi_side {layout.roi_side} is too small"
                )
    return trajs


def nominal_config(setup: SetupPose, arm: int, layout: WorldLayout) -> JointConfig:
    """Resting posture of the non-evaluated arm: aimed at the RoI center,
    retracted to minimum insertion so the idle instrument stays clear of the
    working one's path."""
    res = kinematics.solve_ik_dls(setup.arm(arm), layout.roi_center, layout, arm)
    q = kinematics.clamp_to_limits(res.q, layout)
    return JointConfig(q.yaw, q.pitch, layout.joint_limits.insertion[0])


def evaluate_waypoint(
    setup: SetupPose,
    arm: int,
    target: Vec3,
    q_prev: JointConfig,
    layout: WorldLayout,
    checker: SetupChecker | None = None,
    other_q: JointConfig | None = None,
    settings: IkSettings = IkSettings(),
) -> WaypointResult:
    """Track one waypoint with one arm, the other arm held at its nominal posture.

    Unreached targets are graded at the best-effort configuration: the IK
    solution clamped into the joint-limit box.
    """
    if not _inside_roi(target, layout):
        raise ValueError(f"waypoint {target} outside the region of interest")
    if checker is None:
        checker = SetupChecker(setup, layout)
    if other_q is None:
        other_q = nominal_config(setup, 3 - arm, layout)

    res = kinematics.solve_ik_dls(setup.arm(arm), target, layout, arm, settings, q_init=q_prev)
    reachable = (
        res.error_norm < REACH_TOLERANCE
        and _inside_roi(res.achieved, layout)
        and res.within_limits
    )
    q_used = kinematics.clamp_to_limits(res.q, layout)
    q1, q2 = (q_used, other_q) if arm == 1 else (other_q, q_used)
    return WaypointResult(
        reachable=reachable,
        self_free=not checker.self_collides(q1, q2),
        env_free=not checker.env_collides(arm, q_used),
        q_used=q_used,
    )


def evaluate_setup(setup: SetupPose, layout: WorldLayout) -> TrajectoryReport:
    """Mean and deviation of the three metrics over the nine canonical circles."""
    trajs = canonical_trajectories(layout)
    checker = SetupChecker(setup, layout)
    nominal = {arm: nominal_config(setup, arm, layout) for arm in (1, 2)}

    per_traj = []
    for traj in trajs:
        wps = traj.waypoints()
        flags = {}
        for arm in (1, 2):
            q_prev = nominal[arm]
            results = []
            for wp in wps:
                r = evaluate_waypoint(
                    setup, arm, wp, q_prev, layout,
                    checker=checker, other_q=nominal[3 - arm],
                )
                results.append(r)
                q_prev = r.q_used
            flags[arm] = results
        reach = [a.reachable and b.reachable for a, b in zip(flags[1], flags[2])]
        selff = [a.self_free and b.self_free for a, b in zip(flags[1], flags[2])]
        envf = [a.env_free and b.env_free for a, b in zip(flags[1], flags[2])]
        per_traj.append((
            sum(reach) / len(wps),
            sum(selff) / len(wps),
            sum(envf) / len(wps),
        ))

    arr = np.asarray(per_traj)
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)
    return TrajectoryReport(
        reach_mean=float(means[0]),
        reach_std=float(stds[0]),
        self_mean=float(means[1]),
        self_std=float(stds[1]),
        env_mean=float(means[2]),
        env_std=float(stds[2]),
        combined=float(means.sum()),
        per_trajectory=tuple(map(tuple, per_traj)),
    )


def report_table(report: TrajectoryReport, title: str = "setup") -> str:
    """Fixed-layout text table of the trajectory metrics."""
    lines = [f"Trajectory metrics ({title})", "-" * 46]
    for name, mean, std in report.rows():
        lines.append(f"{name:<30s} {mean:.2f} +/- {std:.2f}")
    lines.append(f"{'Combined':<30s} {report.combined:.2f}")
    return "\n".join(lines)
