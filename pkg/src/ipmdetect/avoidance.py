"""Reactive response to the obstacle list: lateral offset or emergency stop.

Obstacles are gated by a rectangular box ahead of the robot, transformed into
the lane frame using the estimated lane pose, and either a safe lateral
reference is emitted or the target speed is set to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .detection import Obstacle
from .errors import InvalidPose
from .geometry import GroundPoint


@dataclass(frozen=True)
class LanePose:
    """Robot state relative to the lane: signed lateral offset from the lane
    middle (left positive) and heading relative to the lane direction."""

    d: float
    theta: float


@dataclass(frozen=True)
class GatingBox:
    """Rectangle ahead of the robot; only obstacles inside it are considered."""

    length: float
    half_width: float

    def __post_init__(self):
        if self.length <= 0 or self.half_width <= 0:
            raise ValueError("gating box dimensions must be positive")


@dataclass(frozen=True)
class AvoidanceConfig:
    lane_width: float = 0.46
    robot_width: float = 0.13
    safety_margin: float = 0.05
    box: GatingBox = field(default_factory=lambda: GatingBox(length=0.6, half_width=0.25))
    cruise_speed: float = 0.25
    # True reproduces the shipped behavior: any gated obstacle stops the robot.
    strict_stop: bool = True

    def __post_init__(self):
        if not (self.lane_width > self.robot_width > 0):
            raise ValueError("need lane_width > robot_width > 0")
        if self.safety_margin < 0:
            raise ValueError("safety margin cannot be negative")


@dataclass(frozen=True)
class AvoidanceCommand:
    """Planner output: target lateral offset, target speed, and active flag."""

    d_ref: float
    v_ref: float
    active: bool

    def __post_init__(self):
        if self.v_ref < 0:
            raise ValueError("target speed cannot be negative")

    def to_json(self) -> dict:
        return {"d_ref_m": self.d_ref, "v_ref_mps": self.v_ref, "active": self.active}


def gate_obstacles(obs: list[Obstacle], box: GatingBox) -> list[Obstacle]:
    """Keep in-lane obstacles inside the box; out-of-lane ones are ignored."""
    return [
        ob
        for ob in obs
        if ob.in_lane and 0.0 < ob.x <= box.length and abs(ob.y) <= box.half_width
    ]


def to_lane_frame(p: GroundPoint, pose: LanePose) -> tuple[float, float]:
    """Robot-frame point -> (s along lane, e lateral from the lane middle)."""
    if abs(pose.theta) >= math.pi / 2:
        raise InvalidPose(f"|theta| = {abs(pose.theta):.3f} rad >= pi/2")
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    s_along = c * p.x + s * p.y
    e_rel = -s * p.x + c * p.y
    return s_along, e_rel + pose.d


def plan(obs: list[Obstacle], pose: LanePose, cfg: AvoidanceConfig) -> AvoidanceCommand:
    """Decide between cruising, swerving inside the lane, and stopping.

    With no gated obstacle the command is inactive pass-through.  More than
    one gated obstacle (or strict_stop) means an emergency stop.  For exactly
    one obstacle, the free corridor on its wider side is measured; if robot
    width plus safety margin fits, d_ref targets the corridor midpoint,
    otherwise the robot stops.  An invalid pose degrades to a stop.
    """
    gated = gate_obstacles(obs, cfg.box)
    if not gated:
        return AvoidanceCommand(d_ref=0.0, v_ref=cfg.cruise_speed, active=False)
    if cfg.strict_stop or len(gated) > 1:
        return AvoidanceCommand(d_ref=0.0, v_ref=0.0, active=True)

    ob = gated[0]
    try:
        _, e_obs = to_lane_frame(GroundPoint(ob.x, ob.y), pose)
    except InvalidPose:
        return AvoidanceCommand(d_ref=0.0, v_ref=0.0, active=True)

    half = cfg.lane_width / 2.0
    gap = half + abs(e_obs) - ob.radius
    if gap < cfg.robot_width + cfg.safety_margin:
        return AvoidanceCommand(d_ref=0.0, v_ref=0.0, active=True)

    # Free corridor runs from the lane edge opposite the obstacle to the
    # obstacle's near edge; aim for its midpoint, never past the lane middle
    # by more than half the remaining clearance.
    if e_obs >= 0:
        corridor = (-half, e_obs - ob.radius)
    else:
        corridor = (e_obs + ob.radius, half)
    d_ref = (corridor[0] + corridor[1]) / 2.0
    bound = half - cfg.robot_width / 2.0
    d_ref = min(max(d_ref, -bound), bound)
    return AvoidanceCommand(d_ref=d_ref, v_ref=cfg.cruise_speed, active=True)
