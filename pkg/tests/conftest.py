import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from armkit import ArmModel, DHRow, JointLimit, default_arm

WIDE_LIMITS = tuple(JointLimit(0.0, 359.0) for _ in range(6))


def make_arm(
    a=(0.0,) * 6,
    d=(0.0,) * 6,
    alpha_deg=(0.0,) * 6,
    theta_offset_deg=(0.0,) * 6,
    limits=WIDE_LIMITS,
    name="test-arm",
):
    rows = tuple(
        DHRow(theta_offset_deg=t, alpha_deg=al, a_m=ai, d_m=di)
        for t, al, ai, di in zip(theta_offset_deg, alpha_deg, a, d)
    )
    return ArmModel(rows=rows, limits=limits, name=name)


def random_arm(rng: np.random.Generator, name="random-arm") -> ArmModel:
    a = rng.uniform(0.0, 0.3, 6)
    d = rng.uniform(-0.3, 0.3, 6)
    alpha = rng.uniform(-179.0, 180.0, 6)
    toff = rng.uniform(-179.0, 180.0, 6)
    lows = rng.uniform(0.0, 170.0, 6)
    highs = lows + rng.uniform(5.0, 180.0, 6)
    limits = tuple(JointLimit(float(lo), float(hi)) for lo, hi in zip(lows, highs))
    return make_arm(a=a, d=d, alpha_deg=alpha, theta_offset_deg=toff, limits=limits, name=name)


def random_config(rng: np.random.Generator, model: ArmModel):
    from armkit import JointConfig

    lo, hi = model.limits_deg
    return JointConfig(tuple(rng.uniform(lo, hi)))


@pytest.fixture
def arm():
    return default_arm()


@pytest.fixture
def planar2r():
    """Two unit links in the x-y plane embedded in six rows."""
    return make_arm(a=(1.0, 1.0, 0.0, 0.0, 0.0, 0.0))


@pytest.fixture
def wide_arm():
    """Default geometry with wide-open limits; reaches top-down grasps."""
    return ArmModel(rows=default_arm().rows, limits=WIDE_LIMITS, name="wide-6dof")
