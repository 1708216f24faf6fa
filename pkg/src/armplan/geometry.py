"""Analytic collision primitives and the ground-truth scene checker.

Bodies are capsules (arm spar, extracorporeal and intracorporeal shaft
segments, endoscope), one finite cone (camera-arm workspace envelope), and
two half-space walls. Capsule-capsule and capsule-wall tests are exact;
capsule-cone is tested with spheres placed densely along the capsule axis
(spacing capped at 2 mm so the conservative discretization error stays
below the 1e-3 m agreement band used by the sampling oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics
from .kinematics import JointConfig, Vec3
from .world import SetupPose, WorldLayout

_EPS = 1e-12

# Top of the spar capsule, above the RCM.
SPAR_TOP_OFFSET = 0.20

# Cap on the sphere spacing used by the capsule-cone test.
CONE_SPHERE_SPACING = 0.002
CONE_SPHERE_MIN_COUNT = 16


@dataclass(frozen=True)
class Capsule:
    a: Vec3
    b: Vec3
    r: float


@dataclass(frozen=True)
class Cone:
    """Finite solid cone: apex, unit axis, half-angle in (0, pi/2), height."""

    apex: Vec3
    axis: Vec3
    half_angle: float
    height: float


@dataclass(frozen=True)
class HalfSpace:
    """Solid obstacle region {p : normal . p >= offset}; normal is unit length."""

    normal: Vec3
    offset: float


Primitive = Capsule | Cone | HalfSpace


def segment_segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2]."""
    d1 = (q1[0] - p1[0], q1[1] - p1[1], q1[2] - p1[2])
    d2 = (q2[0] - p2[0], q2[1] - p2[1], q2[2] - p2[2])
    r = (p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2])
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]

    if a <= _EPS and e <= _EPS:
        return math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if a <= _EPS:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
        if e <= _EPS:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > _EPS else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)

    cx = p1[0] + s * d1[0] - p2[0] - t * d2[0]
    cy = p1[1] + s * d1[1] - p2[1] - t * d2[1]
    cz = p1[2] + s * d1[2] - p2[2] - t * d2[2]
    return math.sqrt(cx * cx + cy * cy + cz * cz)


def point_cone_distance(p: Vec3, cone: Cone) -> float:
    """Exact distance from a point to the solid finite cone (0 if inside)."""
    return float(_points_cone_distance(np.asarray(p, float).reshape(1, 3), cone)[0])


def _points_cone_distance(pts: np.ndarray, cone: Cone) -> np.ndarray:
    """Vectorized point-to-finite-cone distance for an (n, 3) array."""
    apex = np.asarray(cone.apex, float)
    axis = np.asarray(cone.axis, float)
    v = pts - apex
    z = v @ axis
    rho_sq = np.maximum(np.einsum("ij,ij->i", v, v) - z * z, 0.0)
    rho = np.sqrt(rho_sq)

    h = cone.height
    w = h * math.tan(cone.half_angle)
    inside = (z >= 0.0) & (z <= h) & (rho <= z * math.tan(cone.half_angle))

    # The cone cross-section in the (rho, z) half-plane is the triangle
    # (0,0)-(w,h)-(0,h); the boundary surfaces are the slant edge and the base.
    d_slant = _pt_seg_dist_2d(rho, z, 0.0, 0.0, w, h)
    d_base = _pt_seg_dist_2d(rho, z, w, h, 0.0, h)
    return np.where(inside, 0.0, np.minimum(d_slant, d_base))


def _pt_seg_dist_2d(px: np.ndarray, py: np.ndarray, ax: float, ay: float, bx: float, by: float) -> np.ndarray:
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom <= _EPS:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / denom, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _capsule_capsule(a: Capsule, b: Capsule, margin: float) -> bool:
    return segment_segment_distance(a.a, a.b, b.a, b.b) <= a.r + b.r + margin


def _capsule_halfspace(c: Capsule, hs: HalfSpace, margin: float) -> bool:
    # Signed distance from an endpoint to the wall surface; negative inside.
    sa = hs.offset - (hs.normal[0] * c.a[0] + hs.normal[1] * c.a[1] + hs.normal[2] * c.a[2])
    sb = hs.offset - (hs.normal[0] * c.b[0] + hs.normal[1] * c.b[1] + hs.normal[2] * c.b[2])
    return min(sa, sb) <= c.r + margin


def _capsule_cone(c: Capsule, cone: Cone, margin: float) -> bool:
    # Broad phase: every cone point lies within height*tan(half) of the axis.
    axis_end = (
        cone.apex[0] + cone.height * cone.axis[0],
        cone.apex[1] + cone.height * cone.axis[1],
        cone.apex[2] + cone.height * cone.axis[2],
    )
    reach = cone.height * math.tan(cone.half_angle) + c.r + margin
    if segment_segment_distance(c.a, c.b, cone.apex, axis_end) > reach:
        return False

    ax, ay, az = c.a
    bx, by, bz = c.b
    length = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
    n = max(CONE_SPHERE_MIN_COUNT, int(math.ceil(length / CONE_SPHERE_SPACING)) + 1)
    t = np.linspace(0.0, 1.0, n)
    centers = np.empty((n, 3))
    centers[:, 0] = ax + t * (bx - ax)
    centers[:, 1] = ay + t * (by - ay)
    centers[:, 2] = az + t * (bz - az)
    return bool(np.any(_points_cone_distance(centers, cone) <= c.r + margin))


def collide(a: Primitive, b: Primitive, margin: float = 0.0) -> bool:
    """Pairwise collision test; symmetric in its arguments.

    Supported pairs: capsule-capsule, capsule-cone, capsule-half-space.
    """
    if isinstance(a, Capsule) and isinstance(b, Capsule):
        return _capsule_capsule(a, b, margin)
    if isinstance(a, Capsule) and isinstance(b, Cone):
        return _capsule_cone(a, b, margin)
    if isinstance(a, Cone) and isinstance(b, Capsule):
        return _capsule_cone(b, a, margin)
    if isinstance(a, Capsule) and isinstance(b, HalfSpace):
        return _capsule_halfspace(a, b, margin)
    if isinstance(a, HalfSpace) and isinstance(b, Capsule):
        return _capsule_halfspace(b, a, margin)
    raise TypeError(f"unsupported primitive pair: {type(a).__name__}, {type(b).__name__}")


@dataclass(frozen=True)
class ArmBodies:
    spar: Capsule
    shaft_out: Capsule
    shaft_in: Capsule

    def all(self) -> tuple[Capsule, Capsule, Capsule]:
        return (self.spar, self.shaft_out, self.shaft_in)


@dataclass(frozen=True)
class BodySet:
    arm1: ArmBodies
    arm2: ArmBodies
    ecm: tuple[Capsule, Cone]
    env: tuple[HalfSpace, HalfSpace]

    def count(self) -> int:
        return 3 + 3 + len(self.ecm) + len(self.env)


@dataclass(frozen=True)
class CheckResult:
    self_collision: bool
    env_collision_arm1: bool
    env_collision_arm2: bool

    def env_collision(self, arm: int) -> bool:
        return self.env_collision_arm1 if arm == 1 else self.env_collision_arm2


def ecm_bodies(layout: WorldLayout) -> tuple[Capsule, Cone]:
    e = layout.ecm
    tip = (
        e.rcm[0] + e.endoscope_length * e.endoscope_dir[0],
        e.rcm[1] + e.endoscope_length * e.endoscope_dir[1],
        e.rcm[2] + e.endoscope_length * e.endoscope_dir[2],
    )
    scope = Capsule(e.rcm, tip, e.endoscope_radius)
    # Workspace cone opens opposite the endoscope, from its pivot outward.
    cone = Cone(
        apex=e.rcm,
        axis=(-e.endoscope_dir[0], -e.endoscope_dir[1], -e.endoscope_dir[2]),
        half_angle=e.cone_half_angle,
        height=e.cone_height,
    )
    return scope, cone


def wall_bodies(layout: WorldLayout) -> tuple[HalfSpace, HalfSpace]:
    return tuple(HalfSpace(w.normal, w.offset) for w in layout.walls)  # type: ignore[return-value]


def _arm_bodies(base_point: Vec3, rcm: Vec3, psi: float, q: JointConfig, layout: WorldLayout) -> ArmBodies:
    d = kinematics.instrument_direction(psi, q)
    out_len = layout.tool_length - q.insertion
    spar = Capsule(base_point, (rcm[0], rcm[1], rcm[2] + SPAR_TOP_OFFSET), layout.spar_radius)
    shaft_out = Capsule(
        rcm,
        (rcm[0] - out_len * d[0], rcm[1] - out_len * d[1], rcm[2] - out_len * d[2]),
        layout.shaft_outer_radius,
    )
    shaft_in = Capsule(
        rcm,
        (rcm[0] + q.insertion * d[0], rcm[1] + q.insertion * d[1], rcm[2] + q.insertion * d[2]),
        layout.shaft_inner_radius,
    )
    return ArmBodies(spar=spar, shaft_out=shaft_out, shaft_in=shaft_in)


def build_bodies(setup: SetupPose, q1: JointConfig, q2: JointConfig, layout: WorldLayout) -> BodySet:
    """All ten scene bodies for a setup and one joint configuration per arm."""
    arms = []
    for arm, q in ((1, q1), (2, q2)):
        base = setup.arm(arm)
        psi = kinematics.heading_angle(base, layout, arm)
        rcm = kinematics.rcm_from_base(base, layout, arm)
        arms.append(_arm_bodies((base.x, base.y, layout.base_height), rcm, psi, q, layout))
    return BodySet(arm1=arms[0], arm2=arms[1], ecm=ecm_bodies(layout), env=wall_bodies(layout))


class SetupChecker:
    """Collision checks for one fixed setup, amortizing the static geometry.

    The spar capsules and their pairings with walls, the camera arm, and
    each other do not depend on the sampled joint configuration, so they
    are resolved once per setup.
    """

    def __init__(self, setup: SetupPose, layout: WorldLayout, include_ecm: bool = True):
        self.setup = setup
        self.layout = layout
        self.include_ecm = include_ecm
        self.margin = layout.wall_margin
        self.ecm = ecm_bodies(layout) if include_ecm else ()
        self.walls = wall_bodies(layout)

        self._psi = []
        self._rcm = []
        self._base_pt = []
        self._spar = []
        for arm in (1, 2):
            base = setup.arm(arm)
            psi = kinematics.heading_angle(base, layout, arm)
            rcm = kinematics.rcm_from_base(base, layout, arm)
            self._psi.append(psi)
            self._rcm.append(rcm)
            self._base_pt.append((base.x, base.y, layout.base_height))
            self._spar.append(
                Capsule(
                    (base.x, base.y, layout.base_height),
                    (rcm[0], rcm[1], rcm[2] + SPAR_TOP_OFFSET),
                    layout.spar_radius,
                )
            )

        self._spar_wall_hit = [
            any(_capsule_halfspace(self._spar[i], w, self.margin) for w in self.walls) for i in (0, 1)
        ]
        self._static_self_hit = _capsule_capsule(self._spar[0], self._spar[1], 0.0) or any(
            collide(spar, body) for spar in self._spar for body in self.ecm
        )

    def _dynamic(self, arm: int, q: JointConfig) -> tuple[Capsule, Capsule]:
        i = arm - 1
        bodies = _arm_bodies(self._base_pt[i], self._rcm[i], self._psi[i], q, self.layout)
        return bodies.shaft_out, bodies.shaft_in

    def arm_bodies(self, arm: int, q: JointConfig) -> ArmBodies:
        i = arm - 1
        return _arm_bodies(self._base_pt[i], self._rcm[i], self._psi[i], q, self.layout)

    def env_collides(self, arm: int, q: JointConfig) -> bool:
        if self._spar_wall_hit[arm - 1]:
            return True
        for body in self._dynamic(arm, q):
            for w in self.walls:
                if _capsule_halfspace(body, w, self.margin):
                    return True
        return False

    def self_collides(self, q1: JointConfig, q2: JointConfig) -> bool:
        if self._static_self_hit:
            return True
        dyn1 = self._dynamic(1, q1)
        dyn2 = self._dynamic(2, q2)
        for b1 in dyn1:
            if _capsule_capsule(b1, self._spar[1], 0.0):
                return True
        for b2 in dyn2:
            if _capsule_capsule(self._spar[0], b2, 0.0):
                return True
        for b1 in dyn1:
            for b2 in dyn2:
                if _capsule_capsule(b1, b2, 0.0):
                    return True
        for body in (*dyn1, *dyn2):
            for other in self.ecm:
                if collide(body, other):
                    return True
        return False

    def check(self, q1: JointConfig, q2: JointConfig) -> CheckResult:
        return CheckResult(
            self_collision=self.self_collides(q1, q2),
            env_collision_arm1=self.env_collides(1, q1),
            env_collision_arm2=self.env_collides(2, q2),
        )


def check_setup(setup: SetupPose, q1: JointConfig, q2: JointConfig, layout: WorldLayout) -> CheckResult:
    """Self- and per-arm environment collision status of one full scene."""
    return SetupChecker(setup, layout).check(q1, q2)
