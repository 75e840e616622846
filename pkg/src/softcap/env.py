"""Soft-capture task environment.

A kinematic 6-DOF gripper chases a free-floating tumbling box.  Episodes
are fixed length; success means holding the per-step reward above a
threshold for a long enough consecutive streak.  The reward is the sum of
four terms: dense distance and alignment shaping, a sparse 0/1 enclosure
bonus when a box corner sits inside the finger region, and a -1 penalty
whenever the gripper transmits normal contact force to the target.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import dynamics, spatial
from .dynamics import ActionLimits, GripperBody, RigidBody
from .spatial import ConvexRegion, Obb, Pose


class RewardTerms(NamedTuple):
    r_dist: float
    r_align: float
    r_surr: float
    r_contact: float


@dataclass
class RandomizationSpec:
    """Per-episode randomization ranges plus observation noise half-widths.

    All ranges are inclusive (low, high) bounds sampled uniformly; a range
    may be degenerate (low == high), which pins the value.
    """

    target_position_low: Tuple[float, float, float] = (0.4, -0.2, -0.2)
    target_position_high: Tuple[float, float, float] = (0.8, 0.2, 0.2)
    gripper_orientation_low: Tuple[float, float, float] = (-0.2618, -0.2618, -0.2618)
    gripper_orientation_high: Tuple[float, float, float] = (0.2618, 0.2618, 0.2618)
    target_lin_vel_low: Tuple[float, float, float] = (-0.02, -0.02, -0.02)
    target_lin_vel_high: Tuple[float, float, float] = (0.02, 0.02, 0.02)
    target_ang_vel_low: Tuple[float, float, float] = (-0.09, -0.09, -0.09)
    target_ang_vel_high: Tuple[float, float, float] = (0.09, 0.09, 0.09)
    target_mass_range: Tuple[float, float] = (0.5, 2.0)
    obs_position_noise: float = 0.005   # m, uniform half-width
    obs_velocity_noise: float = 0.005   # m/s (and rad/s), uniform half-width

    def __post_init__(self):
        for name in (
            "target_position",
            "gripper_orientation",
            "target_lin_vel",
            "target_ang_vel",
        ):
            low = np.asarray(getattr(self, name + "_low"), dtype=float)
            high = np.asarray(getattr(self, name + "_high"), dtype=float)
            if low.shape != (3,) or high.shape != (3,):
                raise ValueError(f"{name} bounds must be length-3")
            if np.any(low > high):
                raise ValueError(f"{name} range has low > high")
        lo, hi = self.target_mass_range
        if lo <= 0.0 or lo > hi:
            raise ValueError("target mass range must satisfy 0 < low <= high")
        if self.obs_position_noise < 0.0 or self.obs_velocity_noise < 0.0:
            raise ValueError("observation noise half-widths must be >= 0")


@dataclass
class EnvConfig:
    tactile_enabled: bool = False
    episode_length: int = 500
    control_dt: float = 1.0 / 60.0
    physics_substeps: int = 4
    action_limits: ActionLimits = field(default_factory=ActionLimits)
    randomization: RandomizationSpec = field(default_factory=RandomizationSpec)
    containment_margin: float = 0.005
    success_reward_threshold: float = 2.0
    success_streak_length: int = 200
    action_noise_fraction: float = 0.10
    translation_only: bool = False
    gripper_start_position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    goal_orientation_offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)  # Euler XYZ, rad
    target_half_extents: Tuple[float, float, float] = (0.05, 0.05, 0.05)

    def __post_init__(self):
        if self.episode_length < self.success_streak_length:
            raise ValueError("episode_length must be >= success_streak_length")
        if not 0.0 <= self.action_noise_fraction < 1.0:
            raise ValueError("action_noise_fraction must lie in [0, 1)")
        if self.control_dt <= 0.0 or self.physics_substeps < 1:
            raise ValueError("control_dt must be > 0 and physics_substeps >= 1")
        if self.containment_margin < 0.0:
            raise ValueError("containment_margin must be >= 0")
        if self.success_streak_length < 1:
            raise ValueError("success_streak_length must be >= 1")
        if np.any(np.asarray(self.target_half_extents, dtype=float) <= 0.0):
            raise ValueError("target_half_extents must be strictly positive")


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    terms: RewardTerms
    done: bool
    info: Dict[str, float]


@dataclass
class TraceRecord:
    """One timestep of an episode trace (CSV row, see ``trace_columns``)."""

    step: int
    action_pre: np.ndarray
    action_post: np.ndarray
    terms: RewardTerms
    reward: float
    contact_force: float
    gripper_pose: Pose
    target_pose: Pose


def compute_reward(
    gripper_pose: Pose,
    finger_region: ConvexRegion,
    target_pose: Pose,
    target_half_extents,
    contact_force: float,
    goal_offset=None,
    margin: float = 0.0,
) -> Tuple[float, RewardTerms]:
    """Reward of a world state: distance and alignment shaping through
    1 - tanh(L2 error), +1 if any target corner is enclosed by the fingers,
    -1 if any normal contact force was transmitted this step."""
    dist = float(np.linalg.norm(gripper_pose.position - target_pose.position))
    r_dist = 1.0 - math.tanh(dist)

    goal_orientation = target_pose.orientation
    if goal_offset is not None:
        goal_orientation = spatial.quat_mul(target_pose.orientation, goal_offset)
    err = spatial.orientation_error(gripper_pose.orientation, goal_orientation)
    r_align = 1.0 - math.tanh(float(np.linalg.norm(err)))

    corners = Obb(target_pose, target_half_extents).corners()
    inside = spatial.contains_points(finger_region, gripper_pose, corners, margin)
    r_surr = 1.0 if bool(np.any(inside)) else 0.0

    r_contact = -1.0 if contact_force > 0.0 else 0.0
    terms = RewardTerms(r_dist, r_align, r_surr, r_contact)
    return r_dist + r_align + r_surr + r_contact, terms


def longest_streak(rewards: Sequence[float], threshold: float) -> int:
    """Length of the longest run of consecutive entries strictly above threshold."""
    best = run = 0
    for r in rewards:
        run = run + 1 if r > threshold else 0
        best = max(best, run)
    return best


def is_success(rewards: Sequence[float], threshold: float = 2.0, streak_length: int = 200) -> bool:
    """True iff some ``streak_length`` consecutive rewards all exceed threshold."""
    return longest_streak(rewards, threshold) >= streak_length


class SoftCaptureEnv:
    """Fixed-length episodic MDP around the dynamics layer.

    Action (continuous, [-1, 1] per component):
        6-dim displacement of the gripper in its own body frame
        (dx, dy, dz, droll, dpitch, dyaw), scaled by the action limits.
        With ``translation_only`` the action is 3-dim and rotation is frozen.

    Observation layout (inertial frame, 39 entries; 40 with tactile):
        ========== ===== ============================================
        Index      Dim   Content
        ========== ===== ============================================
        0..3         3   gripper position (m)
        3..6         3   gripper orientation, Euler XYZ (rad)
        6..9         3   gripper linear velocity (m/s)
        9..12        3   gripper angular velocity (rad/s)
        12..15       3   target position (m, noisy)
        15..18       3   target orientation, Euler XYZ (rad)
        18..21       3   target linear velocity (m/s, noisy)
        21..24       3   target angular velocity (rad/s, noisy)
        24..27       3   position difference, gripper - target
        27..30       3   orientation difference, Euler XYZ (rad)
        30..33       3   linear velocity difference
        33..36       3   angular velocity difference
        36..39       3   per-axis minimum surface distance (m)
        39           1   total normal contact force (N), tactile only
        ========== ===== ============================================

    Difference blocks reuse the same noisy target samples shown in the
    target blocks, so the observation is internally consistent.  The
    per-episode randomization and every noise draw come from one generator
    seeded at ``reset``, which makes episodes bit-reproducible.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self._gripper_template = dynamics.build_open_gripper()
        self._goal_offset = spatial.euler_xyz_to_quat(config.goal_orientation_offset)
        self._half_extents = np.asarray(config.target_half_extents, dtype=float)
        self._rng: Optional[np.random.Generator] = None
        self._gripper: Optional[GripperBody] = None
        self._target: Optional[RigidBody] = None
        self._step_count = 0
        self._done = True
        self._streak = 0
        self._rewards: List[float] = []
        self._trace: List[TraceRecord] = []

    @property
    def observation_dim(self) -> int:
        return 40 if self.config.tactile_enabled else 39

    @property
    def action_dim(self) -> int:
        return 3 if self.config.translation_only else 6

    @property
    def gripper(self) -> GripperBody:
        assert self._gripper is not None, "reset the environment first"
        return self._gripper

    @property
    def target(self) -> RigidBody:
        assert self._target is not None, "reset the environment first"
        return self._target

    @property
    def target_box(self) -> Obb:
        return Obb(self.target.pose, self._half_extents)

    @property
    def episode_rewards(self) -> List[float]:
        return list(self._rewards)

    @property
    def trace(self) -> List[TraceRecord]:
        return list(self._trace)

    def is_success(self) -> bool:
        cfg = self.config
        if len(self._rewards) != cfg.episode_length:
            raise ValueError("success is defined over a complete episode trace")
        return is_success(self._rewards, cfg.success_reward_threshold, cfg.success_streak_length)

    def reset(self, seed: int) -> np.ndarray:
        """Start a new episode.  Draw order is fixed: target position,
        gripper orientation, target linear then angular velocity, mass,
        then the 9 observation-noise values."""
        cfg = self.config
        rnd = cfg.randomization
        self._rng = np.random.default_rng(seed)

        target_pos = self._rng.uniform(rnd.target_position_low, rnd.target_position_high)
        gripper_euler = self._rng.uniform(rnd.gripper_orientation_low, rnd.gripper_orientation_high)
        target_lin = self._rng.uniform(rnd.target_lin_vel_low, rnd.target_lin_vel_high)
        target_ang = self._rng.uniform(rnd.target_ang_vel_low, rnd.target_ang_vel_high)
        mass = float(self._rng.uniform(*rnd.target_mass_range))

        self._gripper = GripperBody(
            pose=Pose(np.asarray(cfg.gripper_start_position, dtype=float),
                      spatial.euler_xyz_to_quat(gripper_euler)),
            sphere_centers=self._gripper_template.sphere_centers,
            sphere_radii=self._gripper_template.sphere_radii,
            finger_region=self._gripper_template.finger_region,
        )
        self._target = RigidBody(
            pose=Pose(target_pos, spatial.quat_identity()),
            lin_vel=target_lin,
            ang_vel=target_ang,
            mass=mass,
            inertia_diag=dynamics.box_inertia_diag(mass, self._half_extents),
        )
        self._step_count = 0
        self._done = False
        self._streak = 0
        self._rewards = []
        self._trace = []
        return self._assemble_observation(contact_force=0.0)

    def step(self, action) -> StepResult:
        if self._done or self._rng is None:
            raise RuntimeError("step called on a finished episode; call reset first")
        cfg = self.config
        action = np.clip(np.asarray(action, dtype=float).reshape(self.action_dim), -1.0, 1.0)

        # Per-component noise of up to +-fraction of the commanded magnitude.
        noise = self._rng.uniform(-1.0, 1.0, self.action_dim)
        noisy = np.clip(action + cfg.action_noise_fraction * np.abs(action) * noise, -1.0, 1.0)

        full_action = noisy
        if cfg.translation_only:
            full_action = np.concatenate([noisy, np.zeros(3)])
        self._gripper = dynamics.apply_gripper_action(
            self._gripper, full_action, cfg.action_limits, cfg.control_dt
        )

        dt_phys = cfg.control_dt / cfg.physics_substeps
        impulse_total = 0.0
        for _ in range(cfg.physics_substeps):
            contacts = dynamics.detect_contacts(self._gripper, self.target_box)
            if contacts:
                self._target, result = dynamics.resolve_contacts(
                    self._target, self.target_box, contacts,
                    self._gripper.velocity_at, dt_phys,
                )
                impulse_total += result.total_normal_impulse
            self._target = dynamics.step_free_body(self._target, dt_phys)
        contact_force = impulse_total / cfg.control_dt

        reward, terms = compute_reward(
            self._gripper.pose,
            self._gripper.finger_region,
            self._target.pose,
            self._half_extents,
            contact_force,
            goal_offset=self._goal_offset,
            margin=cfg.containment_margin,
        )

        self._step_count += 1
        self._done = self._step_count == cfg.episode_length
        self._streak = self._streak + 1 if reward > cfg.success_reward_threshold else 0
        self._rewards.append(reward)

        obs = self._assemble_observation(contact_force)
        self._trace.append(
            TraceRecord(
                step=self._step_count,
                action_pre=action.copy(),
                action_post=noisy.copy(),
                terms=terms,
                reward=reward,
                contact_force=contact_force,
                gripper_pose=Pose(self._gripper.pose.position.copy(), self._gripper.pose.orientation.copy()),
                target_pose=Pose(self._target.pose.position.copy(), self._target.pose.orientation.copy()),
            )
        )
        return StepResult(
            obs=obs,
            reward=reward,
            terms=terms,
            done=self._done,
            info={"success_streak": self._streak, "contact_force": contact_force},
        )

    # ------------------------------------------------------------------
    def _assemble_observation(self, contact_force: float) -> np.ndarray:
        rnd = self.config.randomization
        g = self._gripper
        t = self._target

        # 9 draws every call, scaled afterwards, so the draw count never
        # depends on the configured widths or the tactile flag.
        raw = self._rng.uniform(-1.0, 1.0, 9)
        pos_noise = raw[0:3] * rnd.obs_position_noise
        lin_noise = raw[3:6] * rnd.obs_velocity_noise
        ang_noise = raw[6:9] * rnd.obs_velocity_noise

        rot_t = spatial.quat_to_matrix(t.pose.orientation)
        t_pos = t.pose.position + pos_noise
        t_lin = t.lin_vel + lin_noise
        t_ang = rot_t @ t.ang_vel + ang_noise

        g_euler = spatial.quat_to_euler_xyz(g.pose.orientation)
        t_euler = spatial.quat_to_euler_xyz(t.pose.orientation)
        orient_diff = spatial.orientation_error(g.pose.orientation, t.pose.orientation)
        min_dist = dynamics.closest_pair_per_axis(g, self.target_box)

        parts = [
            g.pose.position,
            g_euler,
            g.lin_vel,
            g.ang_vel,
            t_pos,
            t_euler,
            t_lin,
            t_ang,
            g.pose.position - t_pos,
            orient_diff,
            g.lin_vel - t_lin,
            g.ang_vel - t_ang,
            min_dist,
        ]
        if self.config.tactile_enabled:
            parts.append(np.array([contact_force]))
        obs = np.concatenate(parts)
        if not np.all(np.isfinite(obs)):
            raise FloatingPointError("non-finite observation entries")
        return obs


# ----------------------------------------------------------------------
# Episode trace files: comma-separated text, one row per timestep.
def trace_columns(action_dim: int) -> List[str]:
    cols = ["step"]
    cols += [f"a_pre_{i}" for i in range(action_dim)]
    cols += [f"a_post_{i}" for i in range(action_dim)]
    cols += ["r_dist", "r_align", "r_surr", "r_contact", "reward", "contact_force"]
    cols += ["g_px", "g_py", "g_pz", "g_qw", "g_qx", "g_qy", "g_qz"]
    cols += ["t_px", "t_py", "t_pz", "t_qw", "t_qx", "t_qy", "t_qz"]
    return cols


def write_trace_csv(path, records: Sequence[TraceRecord]) -> None:
    action_dim = len(records[0].action_pre) if records else 6
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_columns(action_dim))
        for r in records:
            row = [r.step]
            row += [float(v) for v in r.action_pre]
            row += [float(v) for v in r.action_post]
            row += [r.terms.r_dist, r.terms.r_align, r.terms.r_surr, r.terms.r_contact]
            row += [r.reward, r.contact_force]
            row += [float(v) for v in r.gripper_pose.position]
            row += [float(v) for v in r.gripper_pose.orientation]
            row += [float(v) for v in r.target_pose.position]
            row += [float(v) for v in r.target_pose.orientation]
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_trace_csv(path) -> Tuple[List[str], List[List[float]]]:
    """Parse a trace file into (header, rows); malformed rows raise with
    their line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return header, rows
