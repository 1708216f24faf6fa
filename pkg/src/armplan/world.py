"""World layout: arm bases, RCM offsets, joint limits, RoI, camera arm, walls.

The layout is loaded from a JSON config (missing keys filled with defaults)
and is immutable afterwards, so it can be shared freely across threads.
Base poses are normalized per arm to the optimization cube [-1, 1]^3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

ARMS = (1, 2)

_EPS = 1e-9


class ConfigError(ValueError):
    """Raised for config parse failures and layout invariant violations."""


@dataclass(frozen=True)
class BasePose:
    """Planar base placement of one arm: position (m) and heading offset (rad)."""

    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class SetupPose:
    """Joint placement of both arms; the 6-D optimization variable."""

    arm1: BasePose
    arm2: BasePose

    def arm(self, arm: int) -> BasePose:
        if arm == 1:
            return self.arm1
        if arm == 2:
            return self.arm2
        raise ValueError(f"arm id must be 1 or 2, got {arm}")


@dataclass(frozen=True)
class JointLimits:
    yaw: tuple[float, float]
    pitch: tuple[float, float]
    insertion: tuple[float, float]

    def as_tuple(self) -> tuple[tuple[float, float], ...]:
        return (self.yaw, self.pitch, self.insertion)


@dataclass(frozen=True)
class Grid:
    """Per-arm search grid on the floor plane: square box around a center."""

    center_x: float
    center_y: float
    half_extent: float

    @property
    def x_range(self) -> tuple[float, float]:
        return (self.center_x - self.half_extent, self.center_x + self.half_extent)

    @property
    def y_range(self) -> tuple[float, float]:
        return (self.center_y - self.half_extent, self.center_y + self.half_extent)


@dataclass(frozen=True)
class EcmLayout:
    """Camera arm: endoscope capsule plus the cone enveloping its workspace."""

    rcm: tuple[float, float, float]
    endoscope_dir: tuple[float, float, float]
    endoscope_length: float
    endoscope_radius: float
    cone_half_angle: float
    cone_height: float


@dataclass(frozen=True)
class Wall:
    """Half-space obstacle: points p with normal . p >= offset are in collision."""

    normal: tuple[float, float, float]
    offset: float


@dataclass(frozen=True)
class WorldLayout:
    base_height: float
    rcm_offset: tuple[float, float, float]
    nominal_heading: tuple[float, float]
    joint_limits: JointLimits
    tool_length: float
    roi_center: tuple[float, float, float]
    roi_side: float
    voxel_count_per_axis: int
    ecm: EcmLayout
    walls: tuple[Wall, Wall]
    grids: tuple[Grid, Grid]
    theta_limit: float
    spar_radius: float
    shaft_outer_radius: float
    shaft_inner_radius: float
    wall_margin: float

    def grid(self, arm: int) -> Grid:
        return self.grids[_arm_index(arm)]

    def heading(self, arm: int) -> float:
        return self.nominal_heading[_arm_index(arm)]


def _arm_index(arm: int) -> int:
    if arm not in ARMS:
        raise ValueError(f"arm id must be 1 or 2, got {arm}")
    return arm - 1


# Defaults reproduce the intended table-side geometry: two arms flanking a
# small region of interest centered above the table origin, camera arm
# behind it, walls to the far left and right.
_DEFAULTS: dict = {
    "base_height": 0.66,
    "rcm_offset": [0.18, 0.0, -0.16],
    "nominal_heading": [math.pi / 6.0, math.pi - math.pi / 6.0],
    "joint_limits": {
        "yaw": [-1.5, 1.5],
        "pitch": [-0.9, 0.9],
        "insertion": [0.05, 0.24],
    },
    "tool_length": 0.45,
    "roi_center": [0.0, 0.0, 0.35],
    "roi_side": 0.06,
    "voxel_count_per_axis": 5,
    "ecm": {
        "rcm": [0.0, -0.12, 0.52],
        "endoscope_dir": None,  # default: aimed at roi_center
        "endoscope_length": 0.15,
        "endoscope_radius": 0.006,
        "cone_half_angle": math.pi / 6.0,
        "cone_height": 0.20,
    },
    "walls": [
        {"normal": [1.0, 0.0, 0.0], "offset": 0.80},
        {"normal": [-1.0, 0.0, 0.0], "offset": 0.80},
    ],
    "grids": [
        {"center": [-0.45, -0.25], "half_extent": 0.35},
        {"center": [0.45, -0.25], "half_extent": 0.35},
    ],
    "theta_limit": 0.3,
    "body_radii": {"spar": 0.05, "shaft_out": 0.025, "shaft_in": 0.005},
    "wall_margin": 0.0,
}


def default_config() -> dict:
    """Deep copy of the default config document (JSON-compatible)."""
    return json.loads(json.dumps(_DEFAULTS))


def _require(cond: bool, name: str, detail: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {detail}")


def _as_vec3(value, path: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a 3-vector of numbers, got {value!r}") from exc
    return (x, y, z)


def _as_float(value, path: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a number, got {value!r}") from exc


def _unit(v: tuple[float, float, float], path: str) -> tuple[float, float, float]:
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    _require(n > _EPS, path, "zero-length direction vector")
    return (v[0] / n, v[1] / n, v[2] / n)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{here}: unknown config key")
        if isinstance(base[key], dict) and not isinstance(value, dict):
            raise ConfigError(f"{here}: expected an object")
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def layout_from_dict(doc: dict) -> WorldLayout:
    """Build and validate a WorldLayout from a (possibly partial) config dict."""
    cfg = _merge(_DEFAULTS, doc)

    jl = cfg["joint_limits"]
    limits = JointLimits(
        yaw=(_as_float(jl["yaw"][0], "joint_limits.yaw"), _as_float(jl["yaw"][1], "joint_limits.yaw")),
        pitch=(_as_float(jl["pitch"][0], "joint_limits.pitch"), _as_float(jl["pitch"][1], "joint_limits.pitch")),
        insertion=(
            _as_float(jl["insertion"][0], "joint_limits.insertion"),
            _as_float(jl["insertion"][1], "joint_limits.insertion"),
        ),
    )

    ecm_cfg = cfg["ecm"]
    roi_center = _as_vec3(cfg["roi_center"], "roi_center")
    ecm_rcm = _as_vec3(ecm_cfg["rcm"], "ecm.rcm")
    if ecm_cfg["endoscope_dir"] is None:
        aim = (roi_center[0] - ecm_rcm[0], roi_center[1] - ecm_rcm[1], roi_center[2] - ecm_rcm[2])
        endo_dir = _unit(aim, "ecm.endoscope_dir")
    else:
        endo_dir = _unit(_as_vec3(ecm_cfg["endoscope_dir"], "ecm.endoscope_dir"), "ecm.endoscope_dir")
    ecm = EcmLayout(
        rcm=ecm_rcm,
        endoscope_dir=endo_dir,
        endoscope_length=_as_float(ecm_cfg["endoscope_length"], "ecm.endoscope_length"),
        endoscope_radius=_as_float(ecm_cfg["endoscope_radius"], "ecm.endoscope_radius"),
        cone_half_angle=_as_float(ecm_cfg["cone_half_angle"], "ecm.cone_half_angle"),
        cone_height=_as_float(ecm_cfg["cone_height"], "ecm.cone_height"),
    )

    walls_cfg = cfg["walls"]
    _require(isinstance(walls_cfg, list) and len(walls_cfg) == 2, "walls", "expected exactly two walls")
    walls = tuple(
        Wall(normal=_unit(_as_vec3(w["normal"], f"walls[{i}].normal"), f"walls[{i}].normal"),
             offset=_as_float(w["offset"], f"walls[{i}].offset"))
        for i, w in enumerate(walls_cfg)
    )

    grids_cfg = cfg["grids"]
    _require(isinstance(grids_cfg, list) and len(grids_cfg) == 2, "grids", "expected exactly two grids")
    grids = tuple(
        Grid(
            center_x=_as_float(g["center"][0], f"grids[{i}].center"),
            center_y=_as_float(g["center"][1], f"grids[{i}].center"),
            half_extent=_as_float(g["half_extent"], f"grids[{i}].half_extent"),
        )
        for i, g in enumerate(grids_cfg)
    )

    radii = cfg["body_radii"]
    layout = WorldLayout(
        base_height=_as_float(cfg["base_height"], "base_height"),
        rcm_offset=_as_vec3(cfg["rcm_offset"], "rcm_offset"),
        nominal_heading=(
            _as_float(cfg["nominal_heading"][0], "nominal_heading"),
            _as_float(cfg["nominal_heading"][1], "nominal_heading"),
        ),
        joint_limits=limits,
        tool_length=_as_float(cfg["tool_length"], "tool_length"),
        roi_center=roi_center,
        roi_side=_as_float(cfg["roi_side"], "roi_side"),
        voxel_count_per_axis=int(cfg["voxel_count_per_axis"]),
        ecm=ecm,
        walls=walls,  # type: ignore[arg-type]
        grids=grids,  # type: ignore[arg-type]
        theta_limit=_as_float(cfg["theta_limit"], "theta_limit"),
        spar_radius=_as_float(radii["spar"], "body_radii.spar"),
        shaft_outer_radius=_as_float(radii["shaft_out"], "body_radii.shaft_out"),
        shaft_inner_radius=_as_float(radii["shaft_in"], "body_radii.shaft_in"),
        wall_margin=_as_float(cfg["wall_margin"], "wall_margin"),
    )
    validate_layout(layout)
    return layout


def validate_layout(layout: WorldLayout) -> None:
    """Check every layout invariant; raises ConfigError naming the constraint."""
    _require(layout.roi_side > 0.0, "roi_side", "must be positive")
    _require(layout.voxel_count_per_axis >= 2, "voxel_count_per_axis", "must be at least 2")
    _require(
        0.0 < layout.ecm.cone_half_angle < math.pi / 2.0,
        "ecm.cone_half_angle",
        "half-angle out of range (0, pi/2)",
    )
    _require(layout.ecm.cone_height > 0.0, "ecm.cone_height", "must be positive")
    _require(layout.ecm.endoscope_length > 0.0, "ecm.endoscope_length", "must be positive")
    _require(layout.ecm.endoscope_radius > 0.0, "ecm.endoscope_radius", "must be positive")
    _require(layout.spar_radius > 0.0, "body_radii.spar", "must be positive")
    _require(layout.shaft_outer_radius > 0.0, "body_radii.shaft_out", "must be positive")
    _require(layout.shaft_inner_radius > 0.0, "body_radii.shaft_in", "must be positive")
    _require(layout.tool_length > 0.0, "tool_length", "must be positive")
    lo, hi = layout.joint_limits.insertion
    _require(
        0.0 < lo < hi <= layout.tool_length,
        "joint_limits.insertion",
        f"must satisfy 0 < lo < hi <= tool_length, got [{lo}, {hi}] with tool_length {layout.tool_length}",
    )
    for name, (a, b) in zip(("yaw", "pitch"), (layout.joint_limits.yaw, layout.joint_limits.pitch)):
        _require(a < b, f"joint_limits.{name}", "lower bound must be below upper bound")
    _require(layout.theta_limit > 0.0, "theta_limit", "must be positive")
    for i, g in enumerate(layout.grids):
        _require(g.half_extent > 0.0, f"grids[{i}].half_extent", "must be positive")
    _require(
        layout.grids[0].x_range[1] < layout.grids[1].x_range[0],
        "grids",
        "the two arm grids must be disjoint in x",
    )
    _require(layout.wall_margin >= 0.0, "wall_margin", "must be non-negative")


def load_config(path: str) -> WorldLayout:
    """Load a JSON layout config; an empty file yields the default layout."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return layout_from_dict({})
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return layout_from_dict(doc)


def default_layout() -> WorldLayout:
    return layout_from_dict({})


def layout_digest(layout: WorldLayout) -> str:
    """Stable digest of a layout, recorded in output artifacts."""
    import hashlib

    blob = json.dumps(_layout_to_dict(layout), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _layout_to_dict(layout: WorldLayout) -> dict:
    return {
        "base_height": layout.base_height,
        "rcm_offset": list(layout.rcm_offset),
        "nominal_heading": list(layout.nominal_heading),
        "joint_limits": {
            "yaw": list(layout.joint_limits.yaw),
            "pitch": list(layout.joint_limits.pitch),
            "insertion": list(layout.joint_limits.insertion),
        },
        "tool_length": layout.tool_length,
        "roi_center": list(layout.roi_center),
        "roi_side": layout.roi_side,
        "voxel_count_per_axis": layout.voxel_count_per_axis,
        "ecm": {
            "rcm": list(layout.ecm.rcm),
            "endoscope_dir": list(layout.ecm.endoscope_dir),
            "endoscope_length": layout.ecm.endoscope_length,
            "endoscope_radius": layout.ecm.endoscope_radius,
            "cone_half_angle": layout.ecm.cone_half_angle,
            "cone_height": layout.ecm.cone_height,
        },
        "walls": [{"normal": list(w.normal), "offset": w.offset} for w in layout.walls],
        "grids": [
            {"center": [g.center_x, g.center_y], "half_extent": g.half_extent} for g in layout.grids
        ],
        "theta_limit": layout.theta_limit,
        "body_radii": {
            "spar": layout.spar_radius,
            "shaft_out": layout.shaft_outer_radius,
            "shaft_in": layout.shaft_inner_radius,
        },
        "wall_margin": layout.wall_margin,
    }


def in_grid(pose: BasePose, layout: WorldLayout, arm: int, tol: float = 1e-9) -> bool:
    g = layout.grid(arm)
    return (
        g.x_range[0] - tol <= pose.x <= g.x_range[1] + tol
        and g.y_range[0] - tol <= pose.y <= g.y_range[1] + tol
        and abs(pose.theta) <= layout.theta_limit + tol
    )


def normalize_base(pose: BasePose, layout: WorldLayout, arm: int) -> tuple[float, float, float]:
    """Affine map of (x, y, theta) onto [-1, 1]^3 for the arm's grid."""
    if not in_grid(pose, layout, arm):
        g = layout.grid(arm)
        raise ValueError(
            f"pose {pose} outside arm-{arm} grid x{g.x_range} y{g.y_range} |theta|<={layout.theta_limit}"
        )
    g = layout.grid(arm)
    return (
        (pose.x - g.center_x) / g.half_extent,
        (pose.y - g.center_y) / g.half_extent,
        pose.theta / layout.theta_limit,
    )


def denormalize_base(u: tuple[float, float, float], layout: WorldLayout, arm: int) -> BasePose:
    """Inverse of normalize_base on [-1, 1]^3."""
    ux, uy, ut = u
    for name, v in (("u[0]", ux), ("u[1]", uy), ("u[2]", ut)):
        if not -1.0 - 1e-9 <= v <= 1.0 + 1e-9:
            raise ValueError(f"{name} = {v} outside [-1, 1]")
    g = layout.grid(arm)
    return BasePose(
        x=g.center_x + ux * g.half_extent,
        y=g.center_y + uy * g.half_extent,
        theta=ut * layout.theta_limit,
    )


def normalize_setup(setup: SetupPose, layout: WorldLayout) -> tuple[float, ...]:
    """6-vector in [-1, 1]^6: arm-1 triple followed by arm-2 triple."""
    return normalize_base(setup.arm1, layout, 1) + normalize_base(setup.arm2, layout, 2)


def denormalize_setup(u: tuple[float, ...], layout: WorldLayout) -> SetupPose:
    if len(u) != 6:
        raise ValueError(f"expected a 6-vector, got length {len(u)}")
    return SetupPose(
        arm1=denormalize_base((u[0], u[1], u[2]), layout, 1),
        arm2=denormalize_base((u[3], u[4], u[5]), layout, 2),
    )
