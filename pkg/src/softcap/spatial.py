"""Quaternion, pose and proximity primitives shared by the whole simulator.

Conventions fixed here and relied on everywhere else:

* quaternions are Hamilton, stored scalar-first as ``[w, x, y, z]`` and
  canonicalized to ``w >= 0`` whenever they pass through normalization;
* Euler angles are intrinsic XYZ (roll about x, then pitch about the new y,
  then yaw about the newest z); pitch is extracted into ``[-pi/2, pi/2]``;
* at the pitch singularity roll is reported as 0 and the residual twist
  folds into yaw, which keeps the extraction deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_QUAT_EPS = 1e-12
# cos(pitch) below which the XYZ extraction switches to the singular branch
_GIMBAL_SIN_LIMIT = 1.0 - 1e-12


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    """Unit quaternion with the sign canonicalized to w >= 0."""
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n < _QUAT_EPS:
        raise ValueError("cannot normalize a near-zero quaternion")
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


def quat_product(a, b) -> np.ndarray:
    """Raw Hamilton product, no normalization (integration use)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product renormalized and canonicalized."""
    return quat_normalize(quat_product(a, b))


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q (q v q*)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    u = q[1:]
    t = 2.0 * np.cross(u, v)
    return v + q[0] * t + np.cross(u, t)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(axis))
    if n < _QUAT_EPS:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    q = np.empty(4)
    q[0] = math.cos(half)
    q[1:] = math.sin(half) / n * axis
    return quat_normalize(q)


def rotation_vector(q) -> np.ndarray:
    """Axis-angle vector of a unit quaternion, angle taken in [0, pi]."""
    q = quat_normalize(q)
    s = float(np.linalg.norm(q[1:]))
    if s < _QUAT_EPS:
        return np.zeros(3)
    angle = 2.0 * math.atan2(s, q[0])
    return q[1:] * (angle / s)


def euler_xyz_to_quat(e) -> np.ndarray:
    """Quaternion of the intrinsic XYZ rotation (roll, pitch, yaw)."""
    roll, pitch, yaw = np.asarray(e, dtype=float)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), roll)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), pitch)
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    return quat_mul(quat_mul(qx, qy), qz)


def quat_to_euler_xyz(q) -> np.ndarray:
    """Intrinsic XYZ angles (roll, pitch, yaw) of a unit quaternion.

    Goes through the rotation matrix, so the result is invariant under a
    sign flip of q.  At |pitch| = pi/2 the convention roll = 0 applies.
    """
    m = quat_to_matrix(quat_normalize(q))
    sp = float(np.clip(m[0, 2], -1.0, 1.0))
    if abs(sp) < _GIMBAL_SIN_LIMIT:
        pitch = math.asin(sp)
        roll = math.atan2(-m[1, 2], m[2, 2])
        yaw = math.atan2(-m[0, 1], m[0, 0])
    else:
        pitch = math.copysign(0.5 * math.pi, sp)
        roll = 0.0
        yaw = math.atan2(m[1, 0], m[1, 1])
    return np.array([roll, pitch, yaw])


def orientation_error(q_a, q_b) -> np.ndarray:
    """Euler-XYZ extraction of the rotation taking frame a onto frame b.

    Zero iff q_a and q_b describe the same rotation; unaffected by the
    sign of either argument.
    """
    return quat_to_euler_xyz(quat_mul(quat_conj(q_a), q_b))


@dataclass
class Pose:
    """Rigid transform: position in meters plus a unit quaternion."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = quat_normalize(self.orientation)

    def transform_point(self, p_local) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, p_local)

    def inverse_transform_point(self, p_world) -> np.ndarray:
        return quat_rotate(quat_conj(self.orientation), np.asarray(p_world, dtype=float) - self.position)


@dataclass
class ConvexRegion:
    """Bounded convex set as half-spaces in a body frame.

    A point p (body frame) is inside iff normals @ p <= offsets holds for
    every row.  Normals are unit length and point outward.  Boundedness is
    guaranteed by the ``from_points`` builder; hand-built regions are the
    caller's responsibility.
    """

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if self.normals.shape[0] != self.offsets.shape[0]:
            raise ValueError("normals and offsets disagree in length")
        if self.normals.shape[0] < 4:
            raise ValueError("a bounded region needs at least 4 half-spaces")
        lengths = np.linalg.norm(self.normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-9):
            raise ValueError("half-space normals must be unit length")

    @classmethod
    def from_points(cls, points) -> "ConvexRegion":
        """Half-space representation of the convex hull of a point cloud."""
        from scipy.spatial import ConvexHull

        points = np.asarray(points, dtype=float).reshape(-1, 3)
        hull = ConvexHull(points)
        # Qhull equations satisfy n.x + b <= 0 inside; coplanar triangles
        # repeat the same plane, so collapse near-duplicates.
        eq = np.unique(np.round(hull.equations, 9), axis=0)
        normals = eq[:, :3]
        offsets = -eq[:, 3]
        lengths = np.linalg.norm(normals, axis=1)
        return cls(normals / lengths[:, None], offsets / lengths)


def contains_point(region: ConvexRegion, region_pose: Pose, p_world, margin: float = 0.0) -> bool:
    """True iff the world point is inside the region shrunk by margin."""
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    local = region_pose.inverse_transform_point(p_world)
    return bool(np.all(region.normals @ local <= region.offsets - margin))


def contains_points(region: ConvexRegion, region_pose: Pose, points_world, margin: float = 0.0) -> np.ndarray:
    """Vectorized ``contains_point`` over an (n, 3) array of world points."""
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    pts = np.asarray(points_world, dtype=float).reshape(-1, 3)
    rot = quat_to_matrix(region_pose.orientation)
    local = (pts - region_pose.position) @ rot
    return np.all(local @ region.normals.T <= region.offsets - margin, axis=1)


@dataclass
class Obb:
    """Oriented box: a pose plus strictly positive half extents (meters)."""

    pose: Pose
    half_extents: np.ndarray

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(self.half_extents <= 0.0):
            raise ValueError("box half extents must be strictly positive")

    def corners(self) -> np.ndarray:
        """The 8 world-frame corner points, shape (8, 3)."""
        signs = np.array(
            [
                [sx, sy, sz]
                for sx in (-1.0, 1.0)
                for sy in (-1.0, 1.0)
                for sz in (-1.0, 1.0)
            ]
        )
        local = signs * self.half_extents
        rot = quat_to_matrix(self.pose.orientation)
        return self.pose.position + local @ rot.T


@dataclass
class Contact:
    """One contact: world point, unit normal from gripper into target, depth >= 0."""

    point: np.ndarray
    normal: np.ndarray
    depth: float

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float).reshape(3)
        self.normal = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(float(np.linalg.norm(self.normal)) - 1.0) > 1e-9:
            raise ValueError("contact normal must be unit length")
        if self.depth < 0.0:
            raise ValueError("contact depth must be >= 0")


@dataclass
class SphereQuery:
    closest_point: np.ndarray
    signed_distance: float
    contact: Optional[Contact]


def sphere_obb_query(center, radius: float, box: Obb) -> SphereQuery:
    """Proximity of a sphere to an oriented box.

    The closest point is the clamp of the center into the box, so for a
    center inside the box the signed distance is -radius by convention
    (depth saturates at the sphere radius).  The contact normal points
    from the sphere side into the box: toward the clamped surface point,
    or toward the box center when the sphere center is inside.
    """
    if radius <= 0.0:
        raise ValueError("sphere radius must be > 0")
    center = np.asarray(center, dtype=float).reshape(3)
    rot = quat_to_matrix(box.pose.orientation)
    local = rot.T @ (center - box.pose.position)
    clamped = np.clip(local, -box.half_extents, box.half_extents)
    delta = local - clamped
    dist = float(np.linalg.norm(delta))
    if dist > _QUAT_EPS:
        signed = dist - radius
        normal_local = -delta / dist
    else:
        # Center inside the box (or exactly on its surface).
        signed = -radius
        r = float(np.linalg.norm(local))
        if r > _QUAT_EPS:
            normal_local = -local / r
        else:
            normal_local = np.array([-1.0, 0.0, 0.0])
    closest_world = box.pose.position + rot @ clamped
    contact = None
    if signed < 0.0:
        contact = Contact(point=closest_world, normal=rot @ normal_local, depth=-signed)
    return SphereQuery(closest_point=closest_world, signed_distance=signed, contact=contact)
