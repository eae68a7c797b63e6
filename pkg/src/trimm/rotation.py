"""Quaternion and Euler-angle math for skeletal rotation channels.

Euler angles follow the de-facto BVH convention: intrinsic rotations
composed in the file's channel order, angles in degrees. Quaternions are
(w, x, y, z), kept unit-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_AXES = "XYZ"
# even permutations of (X, Y, Z); odd orders flip the sin(b) sign
_CYCLIC = {"XYZ", "YZX", "ZXY"}

VALID_ORDERS = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (w, x, y, z); norm stays within 1e-6 of 1."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} not unit")

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_components(w: float, x: float, y: float, z: float) -> "UnitQuaternion":
        """Build a unit quaternion, normalizing away rounding drift."""
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("cannot normalize zero/non-finite quaternion")
        return UnitQuaternion(w / n, x / n, y / n, z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def negate(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)

    def dot(self, other: "UnitQuaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        # Hamilton product
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion.from_components(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ],
            dtype=np.float64,
        )

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Geodesic angle (radians) between the rotations, double cover folded."""
        d = min(1.0, abs(self.dot(other)))
        return 2.0 * math.acos(d)


def axis_quaternion(axis: str, degrees: float) -> UnitQuaternion:
    half = math.radians(degrees) * 0.5
    w, s = math.cos(half), math.sin(half)
    idx = _AXES.index(axis)
    xyz = [0.0, 0.0, 0.0]
    xyz[idx] = s
    return UnitQuaternion.from_components(w, *xyz)


def _check_order(order: str) -> str:
    order = order.upper()
    if order not in VALID_ORDERS:
        raise ValueError(f"rotation order {order!r} must be a permutation of XYZ")
    return order


def euler_to_quaternion(angles_deg, order: str) -> UnitQuaternion:
    """Compose intrinsic axis rotations in `order` into one quaternion.

    `angles_deg` is indexed by axis name: (x, y, z) degrees regardless of
    the application order.
    """
    order = _check_order(order)
    ax, ay, az = (float(a) for a in angles_deg)
    if not all(math.isfinite(a) for a in (ax, ay, az)):
        raise ValueError("euler angles must be finite")
    by_axis = {"X": ax, "Y": ay, "Z": az}
    q = UnitQuaternion.identity()
    for axis in order:
        q = q * axis_quaternion(axis, by_axis[axis])
    return q


def _axis_matrix(axis_idx: int, radians: float) -> np.ndarray:
    c, s = math.cos(radians), math.sin(radians)
    m = np.eye(3)
    j, k = (axis_idx + 1) % 3, (axis_idx + 2) % 3
    m[j, j] = c
    m[k, k] = c
    m[k, j] = s
    m[j, k] = -s
    return m


def quaternion_to_euler(q: UnitQuaternion, order: str) -> tuple[float, float, float]:
    """Invert :func:`euler_to_quaternion`; returns (x, y, z) degrees.

    Gimbal-lock inputs canonicalize with the third applied angle set to 0.
    """
    order = _check_order(order)
    i, j, k = (_AXES.index(ch) for ch in order)
    sigma = 1.0 if order in _CYCLIC else -1.0
    m = q.rotation_matrix()

    sb = max(-1.0, min(1.0, sigma * m[i, k]))
    b = math.asin(sb)
    if abs(sb) < 1.0 - 1e-7:
        a = math.atan2(-sigma * m[j, k], m[k, k])
        c = math.atan2(-sigma * m[i, j], m[i, i])
    else:
        # cos(b) ~ 0: a and c are coupled; keep c = 0 and solve Ri(a) = M Rj(-b)
        c = 0.0
        m_i = m @ _axis_matrix(j, -b)
        j2, k2 = (i + 1) % 3, (i + 2) % 3
        a = math.atan2(m_i[k2, j2], m_i[j2, j2])

    out = [0.0, 0.0, 0.0]
    out[i] = math.degrees(a)
    out[j] = math.degrees(b)
    out[k] = math.degrees(c)
    return out[0], out[1], out[2]


def quaternion_distance(q1: UnitQuaternion, q2: UnitQuaternion) -> float:
    """min(|q1-q2|, |q1+q2|): component distance folded over the double cover."""
    a1, a2 = q1.as_array(), q2.as_array()
    return float(min(np.linalg.norm(a1 - a2), np.linalg.norm(a1 + a2)))
