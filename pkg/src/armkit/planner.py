"""Pick-and-place planning: grasp waypoint schema, joint-space interpolation,
and the servo frame wire encoding.

Wire format, one frame per line, newline terminated, single spaces:
``F <seq> <a0> <a1> <a2> <a3> <a4> <a5> G <g>`` with seq a decimal >= 0,
angles signed decimal centidegrees, and g 0 (open) or 1 (closed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .dh_model import ArmModel, JointConfig, clamp_to_limits
from .ik_solver import IkSettings, NoConvergenceError, UnreachableError, solve_ik
from .kinematics import Pose6D, forward_kinematics, matrix_to_pose

GripperState = Literal["open", "closed"]
GRIPPER_OPEN: GripperState = "open"
GRIPPER_CLOSED: GripperState = "closed"

DEFAULT_CLEARANCE_M = 0.05
DEFAULT_MAX_STEP_DEG = 2.0

# Grasp schema: approach from above, close once at grasp, open once at place.
WAYPOINT_ORDER = ("home", "pre_grasp", "grasp", "lift", "pre_place", "place", "retreat")


@dataclass(frozen=True)
class Waypoint:
    name: str
    pose: Pose6D
    gripper: GripperState


@dataclass(frozen=True)
class GraspPlan:
    """Ordered, named waypoints of one pick-and-place cycle."""

    waypoints: tuple[Waypoint, ...]
    clearance: float

    def waypoint(self, name: str) -> Waypoint:
        for wp in self.waypoints:
            if wp.name == name:
                return wp
        raise KeyError(name)


@dataclass(frozen=True)
class TrajectoryKnot:
    config: JointConfig
    gripper: GripperState


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered joint waypoints; gripper changes sit on zero-motion knots."""

    knots: tuple[TrajectoryKnot, ...]


@dataclass(frozen=True)
class ServoFrame:
    """One controller command: monotone sequence number, six target angles in
    integer centidegrees, and the gripper bit."""

    seq: int
    centidegrees: tuple[int, int, int, int, int, int]
    gripper_closed: bool

    def encode(self) -> str:
        a = self.centidegrees
        g = 1 if self.gripper_closed else 0
        return f"F {self.seq} {a[0]} {a[1]} {a[2]} {a[3]} {a[4]} {a[5]} G {g}\n"


def top_down_pose(x: float, y: float, z: float) -> Pose6D:
    """Pose at (x, y, z) with the tool z-axis pointing straight down; the
    default grasp orientation when perception yields position only."""
    return Pose6D((x, y, z), (0.0, 1.0, 0.0, 0.0))


def _raised(pose: Pose6D, dz: float) -> Pose6D:
    x, y, z = pose.position
    return Pose6D((x, y, z + dz), pose.quaternion)


def plan_pick_place(
    model: ArmModel,
    object_pose: Pose6D,
    place_pose: Pose6D,
    *,
    clearance: float = DEFAULT_CLEARANCE_M,
    ik_settings: IkSettings = IkSettings(),
) -> GraspPlan:
    """Build the seven-waypoint grasp plan and prove every waypoint solvable.

    The gripper closes exactly once (at grasp) and opens exactly once (at
    place); pre/post waypoints sit ``clearance`` meters above their targets
    along world +z.  Raises UnreachableError or NoConvergenceError naming the
    first offending waypoint.
    """
    if clearance < 0.0:
        raise ValueError("clearance must be >= 0")
    home = matrix_to_pose(forward_kinematics(model, model.mid_config()))
    by_name = {
        "home": Waypoint("home", home, GRIPPER_OPEN),
        "pre_grasp": Waypoint("pre_grasp", _raised(object_pose, clearance), GRIPPER_OPEN),
        "grasp": Waypoint("grasp", object_pose, GRIPPER_CLOSED),
        "lift": Waypoint("lift", _raised(object_pose, clearance), GRIPPER_CLOSED),
        "pre_place": Waypoint("pre_place", _raised(place_pose, clearance), GRIPPER_CLOSED),
        "place": Waypoint("place", place_pose, GRIPPER_OPEN),
        "retreat": Waypoint("retreat", _raised(place_pose, clearance), GRIPPER_OPEN),
    }
    bound = model.workspace_bound()
    # Check the commanded poses before the derived ones so errors name the cause.
    for name in ("grasp", "place", "pre_grasp", "lift", "pre_place", "retreat", "home"):
        wp = by_name[name]
        distance = float(np.linalg.norm(wp.pose.position))
        if distance > bound:
            raise UnreachableError(distance, bound, waypoint=name)
    seed = model.mid_config()
    for name in WAYPOINT_ORDER:
        wp = by_name[name]
        try:
            result = solve_ik(model, wp.pose, seed, ik_settings)
        except UnreachableError as exc:
            raise UnreachableError(exc.distance, exc.bound, waypoint=name) from exc
        except NoConvergenceError as exc:
            raise NoConvergenceError(
                exc.best_position_error, exc.best_orientation_error, exc.attempts, waypoint=name
            ) from exc
        seed = result.solution
    return GraspPlan(
        waypoints=tuple(by_name[name] for name in WAYPOINT_ORDER),
        clearance=float(clearance),
    )


def interpolate_trajectory(
    model: ArmModel,
    waypoints: Sequence[tuple[JointConfig, GripperState]],
    max_step_deg: float,
) -> Trajectory:
    """Linear joint-space interpolation between waypoint configurations.

    Between consecutive configurations, ceil(max |dq| / max_step) - 1
    intermediate knots are inserted; a gripper change contributes one extra
    zero-motion knot at the arrival configuration.
    """
    if max_step_deg <= 0.0:
        raise ValueError("max_step_deg must be positive")
    if not waypoints:
        raise ValueError("at least one waypoint required")
    first_config, first_gripper = waypoints[0]
    knots = [TrajectoryKnot(first_config, first_gripper)]
    for (prev_config, prev_gripper), (next_config, next_gripper) in zip(waypoints, waypoints[1:]):
        a = np.array(prev_config.angles_deg)
        b = np.array(next_config.angles_deg)
        gap = float(np.max(np.abs(b - a)))
        steps = math.ceil(gap / max_step_deg)
        for k in range(1, steps + 1):
            t = k / steps
            config = clamp_to_limits(model, JointConfig(tuple((1.0 - t) * a + t * b)))
            knots.append(TrajectoryKnot(config, prev_gripper))
        if next_gripper != prev_gripper:
            knots.append(TrajectoryKnot(next_config, next_gripper))
    return Trajectory(tuple(knots))


def plan_to_trajectory(
    model: ArmModel,
    plan: GraspPlan,
    seed: JointConfig,
    *,
    max_step_deg: float = DEFAULT_MAX_STEP_DEG,
    ik_settings: IkSettings = IkSettings(),
) -> Trajectory:
    """Solve IK per waypoint (each seeded with the previous solution, so the
    whole plan stays on one branch) and interpolate in joint space."""
    solved: list[tuple[JointConfig, GripperState]] = []
    current_seed = seed
    for wp in plan.waypoints:
        try:
            result = solve_ik(model, wp.pose, current_seed, ik_settings)
        except UnreachableError as exc:
            raise UnreachableError(exc.distance, exc.bound, waypoint=wp.name) from exc
        except NoConvergenceError as exc:
            raise NoConvergenceError(
                exc.best_position_error, exc.best_orientation_error, exc.attempts, waypoint=wp.name
            ) from exc
        solved.append((result.solution, wp.gripper))
        current_seed = result.solution
    return interpolate_trajectory(model, solved, max_step_deg)


def _round_half_up_centideg(angle_deg: float) -> int:
    return math.floor(angle_deg * 100.0 + 0.5)


def encode_servo_frames(trajectory: Trajectory) -> list[ServoFrame]:
    """One frame per knot, angles rounded half-up to centidegrees, sequence
    numbers counting from 0."""
    return [
        ServoFrame(
            seq=seq,
            centidegrees=tuple(_round_half_up_centideg(a) for a in knot.config.angles_deg),
            gripper_closed=knot.gripper == GRIPPER_CLOSED,
        )
        for seq, knot in enumerate(trajectory.knots)
    ]


def frames_to_text(frames: Sequence[ServoFrame]) -> str:
    return "".join(frame.encode() for frame in frames)
