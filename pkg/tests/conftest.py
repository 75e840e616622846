"""Shared test oracles: reference rotation matrices, hull-membership via
Delaunay tessellation, and the translation-only diagnostic configuration."""

import math

import numpy as np
import pytest

from softcap import env, sac


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_quat(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def hull_contains(points, query):
    """Membership in the convex hull of a point cloud, decided by locating
    the query inside the hull's simplex tessellation (independent of any
    half-space arithmetic)."""
    from scipy.spatial import Delaunay

    return bool(Delaunay(points).find_simplex(np.asarray(query)) >= 0)


def diagnostic_env_config() -> env.EnvConfig:
    """Translation-only variant: rotation frozen (fixed, deliberately
    misaligned gripper yaw so the alignment term is a small constant),
    static target starting well out of reach, no noise, and a faster
    translation cap.  Return growth then measures pure translation skill
    against a low random-walk baseline."""
    from softcap.dynamics import ActionLimits

    rnd = env.RandomizationSpec(
        target_position_low=(0.70, -0.15, -0.15),
        target_position_high=(1.00, 0.15, 0.15),
        gripper_orientation_low=(0.0, 0.0, np.pi),
        gripper_orientation_high=(0.0, 0.0, np.pi),
        target_lin_vel_low=(0.0, 0.0, 0.0),
        target_lin_vel_high=(0.0, 0.0, 0.0),
        target_ang_vel_low=(0.0, 0.0, 0.0),
        target_ang_vel_high=(0.0, 0.0, 0.0),
        target_mass_range=(1.0, 1.0),
        obs_position_noise=0.0,
        obs_velocity_noise=0.0,
    )
    return env.EnvConfig(
        translation_only=True,
        episode_length=150,
        success_streak_length=100,
        action_noise_fraction=0.0,
        action_limits=ActionLimits(max_translation_step=0.02),
        randomization=rnd,
    )


def diagnostic_train_config(episodes: int, seed: int = 0) -> sac.TrainConfig:
    return sac.TrainConfig(
        episodes=episodes,
        seed=seed,
        batch_size=256,
        warmup_steps=1200,
        learning_rate=1e-3,
        initial_log_alpha=float(np.log(0.2)),
    )


def small_env_config(**overrides) -> env.EnvConfig:
    """Short episodes and a small success streak, for fast harness tests."""
    defaults = dict(episode_length=40, success_streak_length=20)
    defaults.update(overrides)
    return env.EnvConfig(**defaults)


def small_train_config(episodes: int, seed: int = 0, **overrides) -> sac.TrainConfig:
    defaults = dict(episodes=episodes, seed=seed, batch_size=32, warmup_steps=60)
    defaults.update(overrides)
    return sac.TrainConfig(**defaults)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
