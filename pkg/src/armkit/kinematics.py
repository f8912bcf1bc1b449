"""Forward kinematics, pose/quaternion algebra, and Jacobians.

All transforms are plain 4x4 numpy arrays: rotation block in the upper left,
translation (meters) in the upper right, bottom row [0, 0, 0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dh_model import JOINT_COUNT, ArmModel, DHRow, JointConfig

# Central-difference step for the finite-difference Jacobian, radians.
JACOBIAN_FD_STEP_RAD = 1e-6


def dh_transform(row: DHRow, joint_angle: float) -> np.ndarray:
    """Homogeneous transform of one joint; ``joint_angle`` in radians.

    The joint variable is ``joint_angle + theta_offset``; twist, link length
    and offset come from the row.
    """
    theta = joint_angle + math.radians(row.theta_offset_deg)
    alpha = math.radians(row.alpha_deg)
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, row.a_m * ct],
            [st, ct * ca, -ct * sa, row.a_m * st],
            [0.0, sa, ca, row.d_m],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _link_frames(model: ArmModel, q_rad: np.ndarray) -> np.ndarray:
    """Cumulative base->joint transforms, shape (7, 4, 4); frames[0] = I."""
    theta = q_rad + model.theta_offset_rad
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(model.alpha_rad), np.sin(model.alpha_rad)
    a, d = model.a, model.d
    frames = np.empty((JOINT_COUNT + 1, 4, 4))
    frames[0] = np.eye(4)
    step = np.zeros((4, 4))
    step[3, 3] = 1.0
    for i in range(JOINT_COUNT):
        step[0, 0] = ct[i]
        step[0, 1] = -st[i] * ca[i]
        step[0, 2] = st[i] * sa[i]
        step[0, 3] = a[i] * ct[i]
        step[1, 0] = st[i]
        step[1, 1] = ct[i] * ca[i]
        step[1, 2] = -ct[i] * sa[i]
        step[1, 3] = a[i] * st[i]
        step[2, 1] = sa[i]
        step[2, 2] = ca[i]
        step[2, 3] = d[i]
        np.matmul(frames[i], step, out=frames[i + 1])
    return frames


def forward_kinematics(model: ArmModel, q: JointConfig) -> np.ndarray:
    """Base-to-end-effector transform: ordered product of the six joint transforms.

    Defined for every configuration; limit validity is not required.
    """
    return _link_frames(model, q.radians)[-1]


def transform_is_valid(T: np.ndarray, tol: float = 1e-9) -> bool:
    """True when T is a well-formed rigid transform within ``tol``."""
    T = np.asarray(T)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        return False
    if not np.array_equal(T[3], np.array([0.0, 0.0, 0.0, 1.0])):
        return False
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        return False
    return abs(float(np.linalg.det(R)) - 1.0) <= tol


def invert_transform(T: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a rigid transform."""
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def _canonical_quat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion with w >= 0; ties at w == 0 make the first nonzero
    component positive so equal rotations compare equal."""
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        for v in q[1:]:
            if v != 0.0:
                if v < 0.0:
                    q = -q
                break
    return q


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> tuple[float, float, float, float]:
    """Canonical unit quaternion (w, x, y, z) of a rotation matrix.

    Branches on the largest of trace/diagonal for numerical stability.
    """
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    w, x, y, z = _canonical_quat(q)
    return (float(w), float(x), float(y), float(z))


@dataclass(frozen=True)
class Pose6D:
    """Position (meters) plus orientation as a canonical unit quaternion.

    The quaternion is normalized and sign-canonicalized (w >= 0) at
    construction; Euler angles exist only as an accessor, in the Z-Y-X
    intrinsic (yaw, pitch, roll) convention.
    """

    position: tuple[float, float, float]
    quaternion: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        p = tuple(float(v) for v in self.position)
        if len(p) != 3:
            raise ValueError(f"position must have 3 components, got {len(p)}")
        raw = np.array([float(v) for v in self.quaternion])
        if raw.shape != (4,):
            raise ValueError("quaternion must be (w, x, y, z)")
        q = _canonical_quat(raw)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", tuple(float(v) for v in q))

    @classmethod
    def identity(cls) -> "Pose6D":
        return cls((0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_position_euler_zyx(
        cls,
        position: Sequence[float],
        yaw_deg: float,
        pitch_deg: float,
        roll_deg: float,
    ) -> "Pose6D":
        R = euler_zyx_to_matrix(yaw_deg, pitch_deg, roll_deg)
        return cls(tuple(position), matrix_to_quat(R))

    def euler_zyx_deg(self) -> tuple[float, float, float]:
        """(yaw, pitch, roll) in degrees; roll is pinned to 0 at pitch = +/-90."""
        return _matrix_to_euler_zyx_deg(quat_to_matrix(self.quaternion))


def euler_zyx_to_matrix(yaw_deg: float, pitch_deg: float, roll_deg: float) -> np.ndarray:
    """Rotation matrix of intrinsic Z-Y-X (yaw, pitch, roll) Euler angles."""
    cy, sy = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    cp, sp = math.cos(math.radians(pitch_deg)), math.sin(math.radians(pitch_deg))
    cr, sr = math.cos(math.radians(roll_deg)), math.sin(math.radians(roll_deg))
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


_POLE_EPS = 1e-10


def _matrix_to_euler_zyx_deg(R: np.ndarray) -> tuple[float, float, float]:
    sp = -R[2, 0]
    if sp >= 1.0 - _POLE_EPS:
        yaw = math.atan2(-R[0, 1], R[1, 1])
        pitch = math.pi / 2.0
        roll = 0.0
    elif sp <= -1.0 + _POLE_EPS:
        yaw = math.atan2(-R[0, 1], R[1, 1])
        pitch = -math.pi / 2.0
        roll = 0.0
    else:
        yaw = math.atan2(R[1, 0], R[0, 0])
        pitch = math.asin(min(1.0, max(-1.0, sp)))
        roll = math.atan2(R[2, 1], R[2, 2])
    return (math.degrees(yaw), math.degrees(pitch), math.degrees(roll))


def matrix_to_pose(T: np.ndarray) -> Pose6D:
    """Pose of a rigid transform; position copied exactly."""
    T = np.asarray(T, dtype=float)
    return Pose6D(tuple(T[:3, 3]), matrix_to_quat(T[:3, :3]))


def pose_to_matrix(pose: Pose6D) -> np.ndarray:
    """Rigid transform of a pose; inverse of matrix_to_pose up to quaternion sign."""
    T = np.eye(4)
    T[:3, :3] = quat_to_matrix(pose.quaternion)
    T[:3, 3] = pose.position
    return T


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (magnitude = angle, radians).

    Stable at both ends: near zero it falls back to the skew part, near pi it
    recovers the axis from the symmetric part and signs it with the skew part.
    """
    tr = float(R[0, 0] + R[1, 1] + R[2, 2])
    cos_theta = min(1.0, max(-1.0, (tr - 1.0) / 2.0))
    theta = math.acos(cos_theta)
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-10:
        return skew / 2.0
    if theta > math.pi - 1e-6:
        B = (np.asarray(R) + np.eye(3)) / 2.0
        u = np.sqrt(np.maximum(np.diag(B), 0.0))
        k = int(np.argmax(u))
        for j in range(3):
            if j != k:
                u[j] = B[k, j] / u[k]
        u /= np.linalg.norm(u)
        s = float(np.dot(skew, u))
        if s < 0.0 or (s == 0.0 and u[int(np.argmax(np.abs(u)))] < 0.0):
            u = -u
        return theta * u
    return theta / (2.0 * math.sin(theta)) * skew


def rotation_angle_between(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Angle of the relative rotation Ra * Rb^T, radians; the uniform
    orientation-error metric."""
    return float(np.linalg.norm(rotation_log(np.asarray(Ra) @ np.asarray(Rb).T)))


def _geometric_jacobian_rad(
    model: ArmModel, q_rad: np.ndarray, frames: np.ndarray | None = None
) -> np.ndarray:
    """Analytic world-frame Jacobian from the revolute-axis cross products."""
    if frames is None:
        frames = _link_frames(model, q_rad)
    p_end = frames[-1][:3, 3]
    J = np.empty((6, JOINT_COUNT))
    for i in range(JOINT_COUNT):
        z = frames[i][:3, 2]
        J[:3, i] = np.cross(z, p_end - frames[i][:3, 3])
        J[3:, i] = z
    return J


def geometric_jacobian(model: ArmModel, q: JointConfig) -> np.ndarray:
    """Analytic 6x6 Jacobian: linear rows m/rad, angular rows rad/rad."""
    return _geometric_jacobian_rad(model, q.radians)


def numeric_jacobian(model: ArmModel, q: JointConfig) -> np.ndarray:
    """Central finite-difference 6x6 Jacobian.

    Column i differentiates the end-effector twist with respect to joint i;
    angular rows come from the log of the relative rotation across the step.
    """
    q0 = q.radians
    h = JACOBIAN_FD_STEP_RAD
    J = np.empty((6, JOINT_COUNT))
    for i in range(JOINT_COUNT):
        qp = q0.copy()
        qm = q0.copy()
        qp[i] += h
        qm[i] -= h
        Tp = _link_frames(model, qp)[-1]
        Tm = _link_frames(model, qm)[-1]
        J[:3, i] = (Tp[:3, 3] - Tm[:3, 3]) / (2.0 * h)
        J[3:, i] = rotation_log(Tp[:3, :3] @ Tm[:3, :3].T) / (2.0 * h)
    return J
