"""Arm geometry: the Denavit-Hartenberg table, joint limits, and the JSON
configuration document that is the single source of arm geometry."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

JOINT_COUNT = 6

# Stock servo ranges (degrees, inclusive), one per motor.
DEFAULT_JOINT_LIMITS_DEG: tuple[tuple[float, float], ...] = (
    (0.0, 180.0),
    (90.0, 180.0),
    (0.0, 90.0),
    (90.0, 180.0),
    (0.0, 180.0),
    (0.0, 90.0),
)

_TOP_LEVEL_KEYS = {"name", "joints"}
_JOINT_KEYS = {"theta_offset_deg", "alpha_deg", "a_m", "d_m", "limit_deg"}


class ArmConfigError(ValueError):
    """An arm configuration document failed to parse or validate."""


@dataclass(frozen=True)
class DHRow:
    """Denavit-Hartenberg parameters of one joint.

    Angles are kept in degrees exactly as they appear in the configuration
    document so that serialization round-trips bit-for-bit; ``ArmModel``
    converts them to radians once, at construction time.
    """

    theta_offset_deg: float = 0.0
    alpha_deg: float = 0.0
    a_m: float = 0.0
    d_m: float = 0.0


@dataclass(frozen=True)
class JointLimit:
    """Inclusive angular range of one servo, degrees."""

    min_deg: float
    max_deg: float

    def contains(self, angle_deg: float) -> bool:
        return self.min_deg <= angle_deg <= self.max_deg

    def clamp(self, angle_deg: float) -> float:
        return min(max(angle_deg, self.min_deg), self.max_deg)

    def midpoint(self) -> float:
        return 0.5 * (self.min_deg + self.max_deg)


@dataclass(frozen=True)
class JointConfig:
    """Six joint angles in degrees; converted to radians only for trigonometry."""

    angles_deg: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        angles = tuple(float(a) for a in self.angles_deg)
        if len(angles) != JOINT_COUNT:
            raise ValueError(f"expected {JOINT_COUNT} joint angles, got {len(angles)}")
        object.__setattr__(self, "angles_deg", angles)

    @property
    def radians(self) -> np.ndarray:
        return np.radians(self.angles_deg)

    @classmethod
    def from_radians(cls, q_rad: Sequence[float]) -> "JointConfig":
        return cls(tuple(math.degrees(float(v)) for v in q_rad))


@dataclass(frozen=True)
class ArmModel:
    """Immutable geometric identity of a six-joint arm: DH rows plus limits.

    Row and limit ``i`` both describe joint/motor ``i``.  The radian views
    (``theta_offset_rad``, ``alpha_rad``, ``a``, ``d``) are derived once here
    and shared by every kinematics routine.
    """

    rows: tuple[DHRow, ...]
    limits: tuple[JointLimit, ...]
    name: str = "arm"

    theta_offset_rad: np.ndarray = field(init=False, repr=False, compare=False)
    alpha_rad: np.ndarray = field(init=False, repr=False, compare=False)
    a: np.ndarray = field(init=False, repr=False, compare=False)
    d: np.ndarray = field(init=False, repr=False, compare=False)
    limits_deg: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        limits = tuple(self.limits)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "limits", limits)
        if len(rows) != JOINT_COUNT:
            raise ArmConfigError(f"expected {JOINT_COUNT} joints, got {len(rows)}")
        if len(limits) != JOINT_COUNT:
            raise ArmConfigError(f"expected {JOINT_COUNT} joint limits, got {len(limits)}")
        for i, row in enumerate(rows):
            if row.a_m < 0:
                raise ArmConfigError(f"joint {i}: link length a_m must be >= 0, got {row.a_m}")
            for label, value in (
                ("theta_offset_deg", row.theta_offset_deg),
                ("alpha_deg", row.alpha_deg),
            ):
                if not -180.0 < value <= 180.0:
                    raise ArmConfigError(f"joint {i}: {label} must lie in (-180, 180], got {value}")
        for i, lim in enumerate(limits):
            if not (0.0 <= lim.min_deg < 360.0 and 0.0 <= lim.max_deg < 360.0):
                raise ArmConfigError(
                    f"joint {i}: limits must lie in [0, 360), got [{lim.min_deg}, {lim.max_deg}]"
                )
            if lim.min_deg >= lim.max_deg:
                raise ArmConfigError(
                    f"joint {i}: limit min must be strictly below max, got [{lim.min_deg}, {lim.max_deg}]"
                )
        object.__setattr__(self, "theta_offset_rad", _frozen_array(math.radians(r.theta_offset_deg) for r in rows))
        object.__setattr__(self, "alpha_rad", _frozen_array(math.radians(r.alpha_deg) for r in rows))
        object.__setattr__(self, "a", _frozen_array(r.a_m for r in rows))
        object.__setattr__(self, "d", _frozen_array(r.d_m for r in rows))
        lim_arr = np.array([[l.min_deg for l in limits], [l.max_deg for l in limits]], dtype=float)
        lim_arr.flags.writeable = False
        object.__setattr__(self, "limits_deg", lim_arr)

    def workspace_bound(self) -> float:
        """Conservative reach radius: no target farther out is attainable."""
        return float(np.sum(self.a + np.abs(self.d)))

    def mid_config(self) -> JointConfig:
        """Configuration at every limit midpoint; the canonical solver seed."""
        return JointConfig(tuple(l.midpoint() for l in self.limits))


def _frozen_array(values: Any) -> np.ndarray:
    arr = np.array(list(values), dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LimitViolation:
    """One joint angle outside its servo range."""

    joint: int
    angle_deg: float
    limit: JointLimit


def check_limits(model: ArmModel, q: JointConfig) -> list[LimitViolation]:
    """List every joint of ``q`` outside its limit; empty list means valid."""
    return [
        LimitViolation(i, angle, lim)
        for i, (angle, lim) in enumerate(zip(q.angles_deg, model.limits))
        if not lim.contains(angle)
    ]


def clamp_to_limits(model: ArmModel, q: JointConfig) -> JointConfig:
    """Project each angle onto the nearest point of its limit interval."""
    return JointConfig(tuple(lim.clamp(angle) for angle, lim in zip(q.angles_deg, model.limits)))


def _require_number(entry: dict, key: str, joint: int) -> float:
    if key not in entry:
        raise ArmConfigError(f"joint {joint}: missing field '{key}'")
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ArmConfigError(f"joint {joint}: '{key}' must be a number, got {value!r}")
    return float(value)


def load_arm_config(text: str) -> ArmModel:
    """Parse a UTF-8 JSON arm configuration document into an ArmModel.

    The document holds ``name`` and exactly six ``joints`` entries with
    ``theta_offset_deg``, ``alpha_deg``, ``a_m``, ``d_m`` and an optional
    ``limit_deg: [min, max]``; omitted limits fall back to the stock servo
    ranges.  Unknown fields are rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArmConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ArmConfigError("top level must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ArmConfigError(f"unknown top-level fields: {sorted(unknown)}")
    name = doc.get("name")
    if not isinstance(name, str):
        raise ArmConfigError("'name' must be a string")
    joints = doc.get("joints")
    if not isinstance(joints, list):
        raise ArmConfigError("'joints' must be an array")
    if len(joints) != JOINT_COUNT:
        raise ArmConfigError(f"expected {JOINT_COUNT} joints, got {len(joints)}")
    rows: list[DHRow] = []
    limits: list[JointLimit] = []
    for i, entry in enumerate(joints):
        if not isinstance(entry, dict):
            raise ArmConfigError(f"joint {i}: must be an object")
        unknown = set(entry) - _JOINT_KEYS
        if unknown:
            raise ArmConfigError(f"joint {i}: unknown fields: {sorted(unknown)}")
        rows.append(
            DHRow(
                theta_offset_deg=_require_number(entry, "theta_offset_deg", i),
                alpha_deg=_require_number(entry, "alpha_deg", i),
                a_m=_require_number(entry, "a_m", i),
                d_m=_require_number(entry, "d_m", i),
            )
        )
        if "limit_deg" in entry:
            raw = entry["limit_deg"]
            if (
                not isinstance(raw, list)
                or len(raw) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)
            ):
                raise ArmConfigError(f"joint {i}: 'limit_deg' must be a [min, max] number pair")
            limits.append(JointLimit(float(raw[0]), float(raw[1])))
        else:
            limits.append(JointLimit(*DEFAULT_JOINT_LIMITS_DEG[i]))
    return ArmModel(rows=tuple(rows), limits=tuple(limits), name=name)


def dump_arm_config(model: ArmModel) -> str:
    """Serialize a model back to the configuration document format.

    Limits are always written, so ``load_arm_config(dump_arm_config(m))``
    reproduces ``m`` field for field.
    """
    joints = [
        {
            "theta_offset_deg": row.theta_offset_deg,
            "alpha_deg": row.alpha_deg,
            "a_m": row.a_m,
            "d_m": row.d_m,
            "limit_deg": [lim.min_deg, lim.max_deg],
        }
        for row, lim in zip(model.rows, model.limits)
    ]
    return json.dumps({"name": model.name, "joints": joints}, indent=2) + "\n"


def default_arm() -> ArmModel:
    """The documented stock geometry, a plausible hobby-arm DH table.

    Every value is a configurable convention, not a measurement; real
    deployments load their own configuration document.
    """
    a = (0.0, 0.105, 0.098, 0.0, 0.0, 0.0)
    d = (0.065, 0.0, 0.0, 0.055, 0.0, 0.045)
    alpha = (90.0, 0.0, 0.0, 90.0, -90.0, 0.0)
    rows = tuple(
        DHRow(theta_offset_deg=0.0, alpha_deg=al, a_m=ai, d_m=di)
        for al, ai, di in zip(alpha, a, d)
    )
    limits = tuple(JointLimit(lo, hi) for lo, hi in DEFAULT_JOINT_LIMITS_DEG)
    return ArmModel(rows=rows, limits=limits, name="default-6dof")
