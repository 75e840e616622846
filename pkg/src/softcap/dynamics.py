"""Rigid-body layer: the free-floating target, the kinematic gripper rig,
and impulse-based contact resolution between gripper spheres and the target
box.  No gravity, no friction, zero restitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .spatial import (
    Contact,
    ConvexRegion,
    Obb,
    Pose,
    euler_xyz_to_quat,
    quat_mul,
    quat_normalize,
    quat_product,
    quat_rotate,
    quat_to_matrix,
    rotation_vector,
)

# Contact solver defaults: fixed iteration count, Baumgarte velocity bias.
SOLVER_PASSES = 10
BAUMGARTE_BETA = 0.2

# Open three-finger rig, all in the gripper body frame.  +x is the approach
# axis; fingers sit on rays 120 degrees apart in the y-z plane and flare
# slightly outward so the fingertip circle has a 0.16 m diameter.
PALM_SPHERE_RADIUS = 0.045
FINGER_SPHERE_RADIUS = 0.012
_FINGER_ANGLES = (0.5 * math.pi, 0.5 * math.pi + 2.0 * math.pi / 3.0, 0.5 * math.pi + 4.0 * math.pi / 3.0)
_FINGER_STATIONS = ((0.070, 0.072), (0.115, 0.077), (0.160, 0.080))  # (axial x, ring radius)
_PALM_RING = (0.050, 0.065)


@dataclass
class RigidBody:
    """Dynamic state of the free-floating target.

    ``lin_vel`` is world frame; ``ang_vel`` and ``inertia_diag`` live in the
    body principal-axis frame.
    """

    pose: Pose
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    mass: float
    inertia_diag: np.ndarray

    def __post_init__(self):
        self.lin_vel = np.asarray(self.lin_vel, dtype=float).reshape(3)
        self.ang_vel = np.asarray(self.ang_vel, dtype=float).reshape(3)
        self.inertia_diag = np.asarray(self.inertia_diag, dtype=float).reshape(3)
        if self.mass <= 0.0:
            raise ValueError("mass must be > 0")
        if np.any(self.inertia_diag <= 0.0):
            raise ValueError("inertia components must be > 0")

    def angular_momentum_world(self) -> np.ndarray:
        rot = quat_to_matrix(self.pose.orientation)
        return rot @ (self.inertia_diag * self.ang_vel)

    def rotational_energy(self) -> float:
        return 0.5 * float(self.ang_vel @ (self.inertia_diag * self.ang_vel))


@dataclass
class GripperBody:
    """Kinematic 6-DOF gripper: pose, derived velocities, collision spheres
    and the precomputed finger enclosure region (all geometry body frame).

    ``ang_vel`` is world frame, matching how the observation reports it.
    """

    pose: Pose
    lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sphere_centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    sphere_radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    finger_region: Optional[ConvexRegion] = None

    def __post_init__(self):
        self.lin_vel = np.asarray(self.lin_vel, dtype=float).reshape(3)
        self.ang_vel = np.asarray(self.ang_vel, dtype=float).reshape(3)
        self.sphere_centers = np.asarray(self.sphere_centers, dtype=float).reshape(-1, 3)
        self.sphere_radii = np.asarray(self.sphere_radii, dtype=float).reshape(-1)
        if self.sphere_centers.shape[0] != self.sphere_radii.shape[0]:
            raise ValueError("sphere centers and radii disagree in length")
        if np.any(self.sphere_radii <= 0.0) and self.sphere_radii.size:
            raise ValueError("sphere radii must be > 0")

    def world_sphere_centers(self) -> np.ndarray:
        rot = quat_to_matrix(self.pose.orientation)
        return self.pose.position + self.sphere_centers @ rot.T

    def velocity_at(self, point_world) -> np.ndarray:
        r = np.asarray(point_world, dtype=float) - self.pose.position
        return self.lin_vel + np.cross(self.ang_vel, r)


@dataclass
class ActionLimits:
    """Per-control-step displacement caps for the 6-dim action."""

    max_translation_step: float = 0.01   # m
    max_rotation_step: float = 0.035     # rad, about 2 degrees

    def __post_init__(self):
        if self.max_translation_step <= 0.0 or self.max_rotation_step <= 0.0:
            raise ValueError("action limits must be > 0")


@dataclass
class ContactResult:
    """Outcome of one resolution pass: contacts kept with their impulses."""

    contacts: List[Contact]
    total_normal_impulse: float
    total_normal_force: float


def box_inertia_diag(mass: float, half_extents) -> np.ndarray:
    """Principal inertia of a solid box from its mass and half extents."""
    h = np.asarray(half_extents, dtype=float).reshape(3)
    a, b, c = 2.0 * h
    return mass / 12.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])


def open_gripper_region_points() -> np.ndarray:
    """The 12 body-frame points spanning the finger enclosure: the 9 finger
    sphere centers plus 3 palm ring points."""
    points = []
    for angle in _FINGER_ANGLES:
        ray = np.array([0.0, math.cos(angle), math.sin(angle)])
        for x, ring in _FINGER_STATIONS:
            points.append(np.array([x, 0.0, 0.0]) + ring * ray)
        points.append(np.array([_PALM_RING[0], 0.0, 0.0]) + _PALM_RING[1] * ray)
    return np.array(points)


def build_open_gripper(pose: Optional[Pose] = None) -> GripperBody:
    """Gripper in the fixed open configuration: 3 chains of 3 finger spheres
    plus one palm sphere, and the enclosure region spanned by the 9 finger
    sphere centers and 3 palm ring points."""
    centers = [np.zeros(3)]
    radii = [PALM_SPHERE_RADIUS]
    for angle in _FINGER_ANGLES:
        ray = np.array([0.0, math.cos(angle), math.sin(angle)])
        for x, ring in _FINGER_STATIONS:
            centers.append(np.array([x, 0.0, 0.0]) + ring * ray)
            radii.append(FINGER_SPHERE_RADIUS)
    region = ConvexRegion.from_points(open_gripper_region_points())
    return GripperBody(
        pose=pose if pose is not None else Pose(),
        sphere_centers=np.array(centers),
        sphere_radii=np.array(radii),
        finger_region=region,
    )


def _body_rates(q: np.ndarray, w: np.ndarray, inertia: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Torque-free Euler equations in the principal frame plus quaternion
    # kinematics with the body-frame rate on the right.
    w_dot = np.cross(inertia * w, w) / inertia
    q_dot = 0.5 * quat_product(q, np.array([0.0, w[0], w[1], w[2]]))
    return q_dot, w_dot


def step_free_body(body: RigidBody, dt: float) -> RigidBody:
    """One torque-free RK4 step: translate by lin_vel, advance (q, omega)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    q0 = body.pose.orientation
    w0 = body.ang_vel
    inertia = body.inertia_diag

    k1q, k1w = _body_rates(q0, w0, inertia)
    k2q, k2w = _body_rates(q0 + 0.5 * dt * k1q, w0 + 0.5 * dt * k1w, inertia)
    k3q, k3w = _body_rates(q0 + 0.5 * dt * k2q, w0 + 0.5 * dt * k2w, inertia)
    k4q, k4w = _body_rates(q0 + dt * k3q, w0 + dt * k3w, inertia)

    q = quat_normalize(q0 + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q))
    w = w0 + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    pos = body.pose.position + body.lin_vel * dt
    return replace(body, pose=Pose(pos, q), ang_vel=w)


def apply_gripper_action(
    g: GripperBody, action, limits: ActionLimits, dt: float
) -> GripperBody:
    """Displace the gripper in its own body frame by a [-1, 1]^6 action.

    Components 0..2 scale the translation step, 3..5 the Euler-XYZ rotation
    step.  Velocities are set to displacement / dt (world frame).  Inputs
    outside [-1, 1] are rejected; clipping is the environment's job.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    action = np.asarray(action, dtype=float).reshape(6)
    if np.any(np.abs(action) > 1.0):
        raise ValueError("action components must lie in [-1, 1]")
    dp_body = action[:3] * limits.max_translation_step
    dq = euler_xyz_to_quat(action[3:] * limits.max_rotation_step)
    dp_world = quat_rotate(g.pose.orientation, dp_body)
    ang_vel_world = quat_rotate(g.pose.orientation, rotation_vector(dq)) / dt
    return replace(
        g,
        pose=Pose(g.pose.position + dp_world, quat_mul(g.pose.orientation, dq)),
        lin_vel=dp_world / dt,
        ang_vel=ang_vel_world,
    )


def detect_contacts(g: GripperBody, target: Obb) -> List[Contact]:
    """One contact per gripper sphere overlapping the target box."""
    from .spatial import sphere_obb_query

    contacts = []
    for center, radius in zip(g.world_sphere_centers(), g.sphere_radii):
        query = sphere_obb_query(center, float(radius), target)
        if query.contact is not None:
            contacts.append(query.contact)
    return contacts


def resolve_contacts(
    target: RigidBody,
    target_box: Obb,
    contacts: Sequence[Contact],
    gripper_vel_at: Callable[[np.ndarray], np.ndarray],
    dt: float,
    passes: int = SOLVER_PASSES,
    beta: float = BAUMGARTE_BETA,
) -> Tuple[RigidBody, ContactResult]:
    """Sequential-impulse resolution against the kinematic gripper.

    The gripper has infinite mass: impulses change only the target.  Each
    contact demands a separating normal velocity of at least beta*depth/dt
    (restitution 0), with the accumulated impulse clamped nonnegative.
    Penetration is corrected only through that velocity bias.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if not contacts:
        return target, ContactResult([], 0.0, 0.0)

    rot = quat_to_matrix(target.pose.orientation)
    inv_inertia_world = rot @ np.diag(1.0 / target.inertia_diag) @ rot.T
    inv_mass = 1.0 / target.mass
    v = target.lin_vel.copy()
    w_world = rot @ target.ang_vel

    n_contacts = len(contacts)
    impulses = np.zeros(n_contacts)
    arms = [c.point - target.pose.position for c in contacts]
    biases = [beta * c.depth / dt for c in contacts]
    gripper_point_vels = [gripper_vel_at(c.point) for c in contacts]

    for _ in range(passes):
        for i, c in enumerate(contacts):
            r = arms[i]
            n = c.normal
            v_rel = float((v + np.cross(w_world, r) - gripper_point_vels[i]) @ n)
            k = inv_mass + float(np.cross(inv_inertia_world @ np.cross(r, n), r) @ n)
            dj = (biases[i] - v_rel) / k
            new_total = max(0.0, impulses[i] + dj)
            dj = new_total - impulses[i]
            impulses[i] = new_total
            v += dj * inv_mass * n
            w_world += inv_inertia_world @ np.cross(r, dj * n)

    total_impulse = float(np.sum(impulses))
    resolved = replace(target, lin_vel=v, ang_vel=rot.T @ w_world)
    result = ContactResult(
        contacts=list(contacts),
        total_normal_impulse=total_impulse,
        total_normal_force=total_impulse / dt,
    )
    return resolved, result


def closest_pair_per_axis(g: GripperBody, target: Obb) -> np.ndarray:
    """Component-wise |difference| of the globally closest point pair
    between the gripper sphere surfaces and the target box surface."""
    from .spatial import sphere_obb_query

    best_gap = math.inf
    best_pair = None
    for center, radius in zip(g.world_sphere_centers(), g.sphere_radii):
        query = sphere_obb_query(center, float(radius), target)
        if query.signed_distance < best_gap:
            towards_box = query.closest_point - center
            d = float(np.linalg.norm(towards_box))
            if d > 1e-12:
                u = towards_box / d
            else:
                towards_center = target.pose.position - center
                dc = float(np.linalg.norm(towards_center))
                u = towards_center / dc if dc > 1e-12 else np.array([1.0, 0.0, 0.0])
            best_gap = query.signed_distance
            best_pair = (center + float(radius) * u, query.closest_point)
    assert best_pair is not None
    return np.abs(best_pair[0] - best_pair[1])
