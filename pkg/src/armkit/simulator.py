"""Deterministic servo-bus simulator: rate-limited virtual servos consuming
the planner's wire frames, with proximity-capture grasping.

Execution discipline is settle-then-send: a frame is applied, the joints slew
to their targets, and only then is the next frame applied.  This removes
timing nondeterminism, so identical inputs always produce identical reports.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .dh_model import JOINT_COUNT, ArmModel, JointConfig
from .ik_solver import IkSettings
from .kinematics import Pose6D, forward_kinematics, invert_transform, matrix_to_pose, pose_to_matrix
from .planner import (
    DEFAULT_CLEARANCE_M,
    DEFAULT_MAX_STEP_DEG,
    GRIPPER_CLOSED,
    GRIPPER_OPEN,
    GripperState,
    ServoFrame,
    encode_servo_frames,
    plan_pick_place,
    plan_to_trajectory,
)

# A cycle places successfully when the object ends within this distance of
# the requested place position.
PLACE_TOLERANCE_M = 0.002

_INT = r"(?:0|[1-9]\d*)"
_FRAME_RE = re.compile(
    rf"^F ({_INT})"
    rf" (-?{_INT}) (-?{_INT}) (-?{_INT}) (-?{_INT}) (-?{_INT}) (-?{_INT})"
    rf" G ([01])$"
)


class FrameError(ValueError):
    """A servo frame is malformed, out of order, or violates joint limits."""


@dataclass(frozen=True)
class SimConfig:
    """Virtual servo parameters."""

    rate_limit_deg_s: float = 300.0
    tick_s: float = 0.01
    capture_radius_m: float = 0.01

    def __post_init__(self) -> None:
        if self.rate_limit_deg_s <= 0.0:
            raise ValueError("rate_limit_deg_s must be positive")
        if self.tick_s <= 0.0:
            raise ValueError("tick_s must be positive")
        if self.capture_radius_m <= 0.0:
            raise ValueError("capture_radius_m must be positive")


@dataclass(frozen=True)
class SimState:
    """Snapshot of the virtual bus: where the joints are, where they are
    headed, the gripper, and the workspace object (attached or free).

    ``grasp_rel`` is the object's pose in the tool frame (16 row-major floats)
    while attached; it stays constant for the whole grasp.
    """

    current_deg: tuple[float, float, float, float, float, float]
    target_deg: tuple[float, float, float, float, float, float]
    gripper: GripperState = GRIPPER_OPEN
    elapsed_s: float = 0.0
    object_pose: Pose6D | None = None
    attached: bool = False
    grasp_rel: tuple[float, ...] | None = None
    last_seq: int = -1


def initial_state(model: ArmModel, object_pose: Pose6D | None = None) -> SimState:
    """Servos parked at their mid-range positions, gripper open."""
    mid = model.mid_config().angles_deg
    return SimState(current_deg=mid, target_deg=mid, object_pose=object_pose)


def parse_frame(line: str) -> ServoFrame:
    """Parse one wire-format line; the exact inverse of ServoFrame.encode."""
    body = line[:-1] if line.endswith("\n") else line
    m = _FRAME_RE.match(body)
    if m is None:
        raise FrameError(f"malformed servo frame: {line!r}")
    seq = int(m.group(1))
    centi = tuple(int(m.group(i)) for i in range(2, 8))
    return ServoFrame(seq=seq, centidegrees=centi, gripper_closed=m.group(8) == "1")


def _tool_transform(model: ArmModel, state: SimState) -> np.ndarray:
    return forward_kinematics(model, JointConfig(state.current_deg))


def _set_gripper(model: ArmModel, state: SimState, gripper: GripperState, config: SimConfig) -> SimState:
    """Instantaneous gripper transition with proximity capture / release."""
    if gripper == state.gripper:
        return state
    if gripper == GRIPPER_CLOSED:
        if state.object_pose is not None and not state.attached:
            tool = _tool_transform(model, state)
            obj = pose_to_matrix(state.object_pose)
            reach = float(np.linalg.norm(tool[:3, 3] - obj[:3, 3]))
            if reach <= config.capture_radius_m:
                rel = invert_transform(tool) @ obj
                return replace(
                    state,
                    gripper=gripper,
                    attached=True,
                    grasp_rel=tuple(float(v) for v in rel.reshape(-1)),
                )
        return replace(state, gripper=gripper)
    # Opening: release wherever the object currently is.
    if state.attached:
        tool = _tool_transform(model, state)
        obj = tool @ np.array(state.grasp_rel).reshape(4, 4)
        return replace(
            state,
            gripper=gripper,
            attached=False,
            grasp_rel=None,
            object_pose=matrix_to_pose(obj),
        )
    return replace(state, gripper=gripper)


def apply_frame(
    model: ArmModel, state: SimState, frame: ServoFrame, config: SimConfig = SimConfig()
) -> SimState:
    """Accept one frame: update targets and gripper; motion happens in steps.

    Frames must arrive with strictly increasing sequence numbers and targets
    inside the joint limits.
    """
    if frame.seq <= state.last_seq:
        raise FrameError(
            f"frame sequence {frame.seq} not greater than last applied {state.last_seq}"
        )
    if len(frame.centidegrees) != JOINT_COUNT:
        raise FrameError(f"frame {frame.seq}: expected {JOINT_COUNT} angles")
    target = tuple(c / 100.0 for c in frame.centidegrees)
    for i, (angle, lim) in enumerate(zip(target, model.limits)):
        if not lim.contains(angle):
            raise FrameError(
                f"frame {frame.seq}: joint {i} target {angle} outside "
                f"[{lim.min_deg}, {lim.max_deg}]"
            )
    new = replace(state, target_deg=target, last_seq=frame.seq)
    gripper = GRIPPER_CLOSED if frame.gripper_closed else GRIPPER_OPEN
    return _set_gripper(model, new, gripper, config)


def sim_step(
    model: ArmModel, state: SimState, dt: float, config: SimConfig = SimConfig()
) -> SimState:
    """Advance time by dt: every joint slews toward its target at the rate
    limit, arriving exactly (no overshoot); an attached object follows the
    tool frame."""
    if dt < 0.0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0:
        return replace(state, elapsed_s=state.elapsed_s + 0.0)
    max_move = config.rate_limit_deg_s * dt
    current = []
    for cur, tgt in zip(state.current_deg, state.target_deg):
        gap = tgt - cur
        if abs(gap) <= max_move:
            current.append(tgt)
        else:
            current.append(cur + math.copysign(max_move, gap))
    new = replace(state, current_deg=tuple(current), elapsed_s=state.elapsed_s + dt)
    if new.attached:
        tool = _tool_transform(model, new)
        obj = tool @ np.array(new.grasp_rel).reshape(4, 4)
        new = replace(new, object_pose=matrix_to_pose(obj))
    return new


def settle(model: ArmModel, state: SimState, config: SimConfig = SimConfig()) -> SimState:
    """Step until every joint sits exactly on its target."""
    while state.current_deg != state.target_deg:
        state = sim_step(model, state, config.tick_s, config)
    return state


@dataclass(frozen=True)
class CycleReport:
    """Outcome of one executed cycle."""

    success: bool
    final_object_pose: Pose6D | None
    frames_sent: int
    sim_time_s: float

    def as_dict(self) -> dict:
        pose = None
        if self.final_object_pose is not None:
            pose = {
                "position_m": list(self.final_object_pose.position),
                "quaternion_wxyz": list(self.final_object_pose.quaternion),
            }
        return {
            "success": self.success,
            "final_object_pose": pose,
            "frames_sent": self.frames_sent,
            "sim_time_s": self.sim_time_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def run_pick_cycle(
    model: ArmModel,
    object_pose: Pose6D,
    place_pose: Pose6D,
    *,
    ik_settings: IkSettings = IkSettings(),
    sim_config: SimConfig = SimConfig(),
    clearance: float = DEFAULT_CLEARANCE_M,
    max_step_deg: float = DEFAULT_MAX_STEP_DEG,
) -> CycleReport:
    """Plan, encode, and execute a full pick-and-place cycle in simulation.

    Success means the object's final position lies within PLACE_TOLERANCE_M of
    the requested place position.  Planning failures raise before any frame is
    sent; execution itself never errors.
    """
    plan = plan_pick_place(
        model, object_pose, place_pose, clearance=clearance, ik_settings=ik_settings
    )
    trajectory = plan_to_trajectory(
        model, plan, model.mid_config(), max_step_deg=max_step_deg, ik_settings=ik_settings
    )
    frames = encode_servo_frames(trajectory)
    state = initial_state(model, object_pose=object_pose)
    for frame in frames:
        state = apply_frame(model, state, frame, sim_config)
        state = settle(model, state, sim_config)
    final = state.object_pose
    success = final is not None and (
        float(np.linalg.norm(np.array(final.position) - np.array(place_pose.position)))
        <= PLACE_TOLERANCE_M
    )
    return CycleReport(
        success=success,
        final_object_pose=final,
        frames_sent=len(frames),
        sim_time_s=state.elapsed_s,
    )


def replay_frames(model: ArmModel, text: str, config: SimConfig = SimConfig()) -> CycleReport:
    """Execute a frame stream (one frame per line) with no workspace object;
    used to replay recorded plans byte-for-byte."""
    state = initial_state(model)
    count = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        state = apply_frame(model, state, parse_frame(line), config)
        state = settle(model, state, config)
        count += 1
    return CycleReport(
        success=True, final_object_pose=None, frames_sent=count, sim_time_s=state.elapsed_s
    )
