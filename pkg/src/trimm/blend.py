"""Seamless transitions between retrieved motion clips.

Joint rotations follow spherical linear interpolation along the shortest
arc; root translation follows a cubic ease whose velocity vanishes at both
endpoints, so consecutive clips join without a velocity pop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator

import numpy as np

from .rotation import UnitQuaternion

_SIN_EPS = 1e-6


def slerp(q1: UnitQuaternion, q2: UnitQuaternion, t: float) -> UnitQuaternion:
    """Shortest-arc spherical interpolation between unit quaternions.

    q2 is negated when the pair straddles hemispheres, keeping the arc
    angle in [0, pi/2]. Near-parallel inputs fall back to normalized
    linear interpolation, where the spherical weights are singular.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")
    dot = q1.dot(q2)
    if dot < 0.0:
        q2 = q2.negate()
        dot = -dot
    if t == 0.0:
        return q1
    if t == 1.0:
        return q2
    dot = min(dot, 1.0)
    theta = math.acos(dot)
    sin_theta = math.sin(theta)
    if sin_theta < _SIN_EPS:
        w = q1.w * (1.0 - t) + q2.w * t
        x = q1.x * (1.0 - t) + q2.x * t
        y = q1.y * (1.0 - t) + q2.y * t
        z = q1.z * (1.0 - t) + q2.z * t
        return UnitQuaternion.from_components(w, x, y, z)
    c1 = math.sin((1.0 - t) * theta) / sin_theta
    c2 = math.sin(t * theta) / sin_theta
    return UnitQuaternion.from_components(
        c1 * q1.w + c2 * q2.w,
        c1 * q1.x + c2 * q2.x,
        c1 * q1.y + c2 * q2.y,
        c1 * q1.z + c2 * q2.z,
    )


def cubic_blend(l1: np.ndarray, l2: np.ndarray, t: float) -> np.ndarray:
    """Position ease (2t^3 - 3t^2 + 1)*L1 + (-2t^3 + 3t^2)*L2."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")
    h1 = 2.0 * t**3 - 3.0 * t**2 + 1.0
    h2 = -2.0 * t**3 + 3.0 * t**2
    return h1 * np.asarray(l1, dtype=np.float64) + h2 * np.asarray(l2, dtype=np.float64)


def blend_velocity(l1: np.ndarray, l2: np.ndarray, t: float) -> np.ndarray:
    """Time derivative of :func:`cubic_blend`; zero at t=0 and t=1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")
    g1 = 6.0 * t**2 - 6.0 * t
    g2 = -6.0 * t**2 + 6.0 * t
    return g1 * np.asarray(l1, dtype=np.float64) + g2 * np.asarray(l2, dtype=np.float64)


@dataclass
class TransitionPlan:
    """Overlap window on the output timeline where two clips are blended.

    ``from_offset`` is the local time inside ``from_clip`` at which the
    overlap starts; the incoming clip plays its head during the overlap.
    """

    from_clip: Any
    to_clip: Any
    overlap: float
    start_time: float
    from_offset: float = 0.0

    def __post_init__(self):
        if self.overlap <= 0.0:
            raise ValueError("transition overlap must be positive")


PoseAccessor = Callable[[Any, float], "Pose"]


@dataclass
class Pose:
    """Skeleton pose: per-joint rotations plus positioned-channel values.

    ``positions`` maps joint index -> 3-vector for joints carrying
    position channels (normally just the root).
    """

    rotations: list[UnitQuaternion]
    positions: dict[int, np.ndarray]

    @property
    def root_position(self) -> np.ndarray:
        return self.positions.get(0, np.zeros(3))


def blend_pose(p_from: Pose, p_to: Pose, t: float) -> Pose:
    """Blend two poses of the same skeleton at parameter t in [0, 1]."""
    if len(p_from.rotations) != len(p_to.rotations):
        raise ValueError(
            f"skeleton mismatch: {len(p_from.rotations)} vs {len(p_to.rotations)} joints"
        )
    rotations = [slerp(qa, qb, t) for qa, qb in zip(p_from.rotations, p_to.rotations)]
    positions = {}
    for idx, pos_a in p_from.positions.items():
        if idx not in p_to.positions:
            raise ValueError(f"skeleton mismatch: joint {idx} positioned on one side only")
        positions[idx] = cubic_blend(pos_a, p_to.positions[idx], t)
    return Pose(rotations=rotations, positions=positions)


def transition_pose(plan: TransitionPlan, pose_at: PoseAccessor, elapsed: float) -> Pose:
    """Pose at `elapsed` seconds into the overlap; both clips keep playing."""
    t = min(1.0, max(0.0, elapsed / plan.overlap))
    p_from = pose_at(plan.from_clip, plan.from_offset + elapsed)
    p_to = pose_at(plan.to_clip, elapsed)
    return blend_pose(p_from, p_to, t)


def blend_transition(
    plan: TransitionPlan, pose_at: PoseAccessor, fps: float
) -> Iterator[tuple[float, Pose]]:
    """Yield (output-timeline time, Pose) frames covering the overlap.

    The first frame reproduces the outgoing clip's pose exactly and the
    last frame the incoming clip's pose at the end of the overlap.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    steps = max(1, round(plan.overlap * fps))
    for i in range(steps + 1):
        u = i / steps
        elapsed = u * plan.overlap
        yield plan.start_time + elapsed, transition_pose(plan, pose_at, elapsed)
