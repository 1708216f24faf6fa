"""Forward and inverse kinematics of the 3-DOF instrument about its fixed RCM.

The instrument direction is d = Rz(heading + theta) * Ry(pitch) * Rx(yaw) * (0, 0, -1)
and the tip sits at RCM + insertion * d. Inverse kinematics uses damped
least squares with step backtracking; joint limits are checked after the
solve, not enforced during iteration (insertion is only kept within the
physical shaft length).

Everything here is pure scalar math on small tuples: these routines run
millions of times inside score generation and must stay allocation-light.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .world import BasePose, WorldLayout

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class JointConfig:
    """One instrument configuration: yaw (rad), pitch (rad), insertion (m)."""

    yaw: float
    pitch: float
    insertion: float


@dataclass(frozen=True)
class IkSettings:
    damping: float = 0.05
    max_iters: int = 200
    pos_tol: float = 1e-6
    backtrack_factor: float = 0.5

    def __post_init__(self) -> None:
        if self.damping <= 0.0:
            raise ValueError("damping must be positive")
        if self.pos_tol <= 0.0:
            raise ValueError("pos_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class IkResult:
    q: JointConfig
    achieved: Vec3
    error_norm: float
    converged: bool
    within_limits: bool
    iterations: int


def heading_angle(base: BasePose, layout: WorldLayout, arm: int) -> float:
    return layout.heading(arm) + base.theta


def rcm_from_base(base: BasePose, layout: WorldLayout, arm: int) -> Vec3:
    """Fixed pivot point of the instrument for a given base placement."""
    psi = heading_angle(base, layout, arm)
    c, s = math.cos(psi), math.sin(psi)
    ox, oy, oz = layout.rcm_offset
    return (
        base.x + c * ox - s * oy,
        base.y + s * ox + c * oy,
        layout.base_height + oz,
    )


def instrument_direction(psi: float, q: JointConfig) -> Vec3:
    """Unit vector from the RCM toward the tip."""
    c1, s1 = math.cos(q.yaw), math.sin(q.yaw)
    c2, s2 = math.cos(q.pitch), math.sin(q.pitch)
    # local frame: Ry(pitch) Rx(yaw) (0, 0, -1)
    lx, ly, lz = -c1 * s2, s1, -c1 * c2
    c, s = math.cos(psi), math.sin(psi)
    return (c * lx - s * ly, s * lx + c * ly, lz)


def tip_position(rcm: Vec3, psi: float, q: JointConfig) -> Vec3:
    d = instrument_direction(psi, q)
    return (rcm[0] + q.insertion * d[0], rcm[1] + q.insertion * d[1], rcm[2] + q.insertion * d[2])


def forward_kinematics(base: BasePose, q: JointConfig, layout: WorldLayout, arm: int) -> Vec3:
    """Tip position in the world frame; |tip - RCM| equals the insertion."""
    psi = heading_angle(base, layout, arm)
    return tip_position(rcm_from_base(base, layout, arm), psi, q)


def jacobian(psi: float, q: JointConfig) -> tuple[Vec3, Vec3, Vec3]:
    """Rows of d(tip)/d(yaw, pitch, insertion) transposed: returns the three columns."""
    c1, s1 = math.cos(q.yaw), math.sin(q.yaw)
    c2, s2 = math.cos(q.pitch), math.sin(q.pitch)
    c, s = math.cos(psi), math.sin(psi)
    q3 = q.insertion

    def rot(v: Vec3) -> Vec3:
        return (c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])

    col_yaw = rot((q3 * s1 * s2, q3 * c1, q3 * s1 * c2))
    col_pitch = rot((-q3 * c1 * c2, 0.0, q3 * c1 * s2))
    col_ins = rot((-c1 * s2, s1, -c1 * c2))
    return col_yaw, col_pitch, col_ins


def _solve3(A: list[list[float]], b: list[float]) -> tuple[float, float, float]:
    """Gaussian elimination with partial pivoting on a 3x3 system."""
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for k in range(3):
        p = max(range(k, 3), key=lambda r: abs(M[r][k]))
        if p != k:
            M[k], M[p] = M[p], M[k]
        piv = M[k][k]
        for r in range(k + 1, 3):
            f = M[r][k] / piv
            for cidx in range(k, 4):
                M[r][cidx] -= f * M[k][cidx]
    x = [0.0, 0.0, 0.0]
    for k in (2, 1, 0):
        x[k] = (M[k][3] - sum(M[k][j] * x[j] for j in range(k + 1, 3))) / M[k][k]
    return (x[0], x[1], x[2])


def _wrap_pi(a: float) -> float:
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def canonicalize(q: JointConfig) -> JointConfig:
    """Map (yaw, pitch) to the principal branch without moving the tip.

    The direction is invariant under 2*pi shifts of either angle and under
    (yaw, pitch) -> (pi - yaw, pitch + pi), so every configuration has an
    equivalent with yaw in [-pi/2, pi/2]; joint-limit checks use it.
    """
    yaw = _wrap_pi(q.yaw)
    pitch = q.pitch
    if yaw > math.pi / 2.0:
        yaw = math.pi - yaw
        pitch += math.pi
    elif yaw < -math.pi / 2.0:
        yaw = -math.pi - yaw
        pitch += math.pi
    return JointConfig(yaw, _wrap_pi(pitch), q.insertion)


def within_limits(q: JointConfig, layout: WorldLayout) -> bool:
    (ylo, yhi), (plo, phi), (ilo, ihi) = layout.joint_limits.as_tuple()
    return ylo <= q.yaw <= yhi and plo <= q.pitch <= phi and ilo <= q.insertion <= ihi


def clamp_to_limits(q: JointConfig, layout: WorldLayout) -> JointConfig:
    (ylo, yhi), (plo, phi), (ilo, ihi) = layout.joint_limits.as_tuple()
    return JointConfig(
        yaw=min(max(q.yaw, ylo), yhi),
        pitch=min(max(q.pitch, plo), phi),
        insertion=min(max(q.insertion, ilo), ihi),
    )


def default_ik_init(layout: WorldLayout) -> JointConfig:
    ilo, ihi = layout.joint_limits.insertion
    return JointConfig(0.0, 0.0, 0.5 * (ilo + ihi))


def solve_ik_dls(
    base: BasePose,
    target: Vec3,
    layout: WorldLayout,
    arm: int,
    settings: IkSettings = IkSettings(),
    q_init: JointConfig | None = None,
    trace: list[float] | None = None,
) -> IkResult:
    """Damped least-squares IK for a position target.

    Each step solves (J J^T + damping^2 I) z = e and applies dq = J^T z,
    halving the step while it would increase the error norm. Insertion is
    clamped to the physical range [0, tool_length]; the surgical joint-limit
    window is only reported via within_limits.
    """
    psi = heading_angle(base, layout, arm)
    rcm = rcm_from_base(base, layout, arm)
    q = q_init if q_init is not None else default_ik_init(layout)
    q = JointConfig(q.yaw, q.pitch, min(max(q.insertion, 0.0), layout.tool_length))

    lam2 = settings.damping * settings.damping
    tip = tip_position(rcm, psi, q)
    err_vec = (target[0] - tip[0], target[1] - tip[1], target[2] - tip[2])
    err = math.sqrt(err_vec[0] ** 2 + err_vec[1] ** 2 + err_vec[2] ** 2)
    if trace is not None:
        trace.append(err)

    iters = 0
    for _ in range(settings.max_iters):
        if err <= settings.pos_tol:
            break
        iters += 1
        j1, j2, j3 = jacobian(psi, q)
        # (J J^T)[r][c] sums the r-th and c-th components over the three columns.
        A = [[j1[r] * j1[c] + j2[r] * j2[c] + j3[r] * j3[c] for c in range(3)] for r in range(3)]
        A[0][0] += lam2
        A[1][1] += lam2
        A[2][2] += lam2
        z = _solve3(A, list(err_vec))
        dq = (
            j1[0] * z[0] + j1[1] * z[1] + j1[2] * z[2],
            j2[0] * z[0] + j2[1] * z[1] + j2[2] * z[2],
            j3[0] * z[0] + j3[1] * z[1] + j3[2] * z[2],
        )

        step = 1.0
        accepted = False
        prev_err = err
        for _ in range(25):
            cand = JointConfig(
                yaw=q.yaw + step * dq[0],
                pitch=q.pitch + step * dq[1],
                insertion=min(max(q.insertion + step * dq[2], 0.0), layout.tool_length),
            )
            tip_c = tip_position(rcm, psi, cand)
            ev = (target[0] - tip_c[0], target[1] - tip_c[1], target[2] - tip_c[2])
            e_c = math.sqrt(ev[0] ** 2 + ev[1] ** 2 + ev[2] ** 2)
            if e_c <= err:
                q, tip, err_vec, err = cand, tip_c, ev, e_c
                accepted = True
                break
            step *= settings.backtrack_factor
        if trace is not None:
            trace.append(err)
        # Stalled progress means the target is on or beyond the reachable
        # boundary (DLS contraction is ~10% per step even at its slowest).
        if not accepted or prev_err - err <= 1e-16 + 1e-9 * err:
            break

    q = canonicalize(q)
    return IkResult(
        q=q,
        achieved=tip,
        error_norm=err,
        converged=err <= settings.pos_tol,
        within_limits=within_limits(q, layout),
        iterations=iters,
    )
