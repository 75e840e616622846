"""Soft actor-critic learner built on the dense-network substrate.

Squashed-Gaussian policy (tanh of a reparameterized Gaussian), twin critics
with soft-updated target copies, adaptive entropy temperature, a uniform
ring replay buffer, and a deterministic training loop wired to the
environment.  One gradient update of critics, policy and temperature runs
every ``train_freq`` environment steps, followed by soft target updates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from . import neural
from .neural import AdamState, DenseParams, ForwardCache

HIDDEN_SIZES = (256, 256)
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class TrainConfig:
    episodes: int = 100
    seed: int = 0
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 1024
    train_freq: int = 4
    learning_rate: float = 3e-4
    buffer_capacity: int = 1_000_000
    warmup_steps: int = 5000
    target_entropy: Optional[float] = None  # default: -action_dim
    initial_log_alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1 or self.train_freq < 1:
            raise ValueError("batch_size and train_freq must be >= 1")
        if self.buffer_capacity < 1 or self.warmup_steps < 0:
            raise ValueError("buffer_capacity must be >= 1 and warmup_steps >= 0")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")


# ----------------------------------------------------------------------
# Policy
@dataclass
class PolicyNet:
    """Maps observations to per-dimension action mean and raw log-std."""

    params: DenseParams
    action_dim: int

    @classmethod
    def create(cls, seed: int, obs_dim: int, action_dim: int) -> "PolicyNet":
        sizes = [obs_dim, *HIDDEN_SIZES, 2 * action_dim]
        return cls(params=neural.init_params(seed, sizes), action_dim=action_dim)


def _policy_heads(policy: PolicyNet, obs: np.ndarray):
    out, cache = neural.forward(policy.params, obs)
    a = policy.action_dim
    mean = out[:, :a]
    raw = out[:, a:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    clamp_mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    return mean, log_std, clamp_mask, cache


def _squashed_log_prob(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    # Gaussian density at u minus the tanh change of variables, with the
    # correction in the stable softplus form.
    std = np.exp(log_std)
    gauss = -0.5 * ((u - mean) / std) ** 2 - log_std - _LOG_SQRT_2PI
    correction = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
    return np.sum(gauss - correction, axis=1)


def _squash(policy: PolicyNet, obs: np.ndarray, noise: np.ndarray):
    """Reparameterized squashed sample for a fixed noise draw."""
    mean, log_std, clamp_mask, cache = _policy_heads(policy, obs)
    std = np.exp(log_std)
    u = mean + std * noise
    action = np.tanh(u)
    log_prob = _squashed_log_prob(u, mean, log_std)
    aux = {"mean": mean, "log_std": log_std, "std": std, "u": u,
           "clamp_mask": clamp_mask, "cache": cache, "noise": noise}
    return action, log_prob, aux


def sample_action(policy: PolicyNet, obs: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """Draw one action in (-1, 1)^a with its log probability."""
    obs = np.asarray(obs, dtype=float).reshape(1, -1)
    noise = rng.standard_normal((1, policy.action_dim))
    action, log_prob, _ = _squash(policy, obs, noise)
    return action[0], float(log_prob[0])


def deterministic_action(policy: PolicyNet, obs: np.ndarray) -> np.ndarray:
    """tanh of the policy mean, used for evaluation."""
    obs = np.asarray(obs, dtype=float).reshape(1, -1)
    mean, _, _, _ = _policy_heads(policy, obs)
    return np.tanh(mean[0])


# ----------------------------------------------------------------------
# Critics
@dataclass
class TwinCritics:
    q1: DenseParams
    q2: DenseParams
    target_q1: DenseParams
    target_q2: DenseParams

    @classmethod
    def create(cls, seed1: int, seed2: int, obs_dim: int, action_dim: int) -> "TwinCritics":
        sizes = [obs_dim + action_dim, *HIDDEN_SIZES, 1]
        q1 = neural.init_params(seed1, sizes)
        q2 = neural.init_params(seed2, sizes)
        return cls(q1=q1, q2=q2, target_q1=q1.clone(), target_q2=q2.clone())


def critic_value(params: DenseParams, obs: np.ndarray, action: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    x = np.concatenate([obs, action], axis=1)
    out, cache = neural.forward(params, x)
    return out[:, 0], cache


def soft_update(online: DenseParams, target: DenseParams, tau: float = 0.005) -> DenseParams:
    """target' = tau * online + (1 - tau) * target, element-wise."""
    return DenseParams(
        [tau * w + (1.0 - tau) * t for w, t in zip(online.weights, target.weights)],
        [tau * b + (1.0 - tau) * t for b, t in zip(online.biases, target.biases)],
    )


# ----------------------------------------------------------------------
# Replay buffer
class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: float


class Batch(NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Uniform ring buffer over transitions.  Storage grows on demand up to
    the fixed capacity, after which the oldest records are overwritten."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self._size = 0
        self._cursor = 0
        self._obs = np.zeros((0, obs_dim))
        self._action = np.zeros((0, action_dim))
        self._reward = np.zeros(0)
        self._next_obs = np.zeros((0, obs_dim))
        self._done = np.zeros(0)

    def __len__(self) -> int:
        return self._size

    def _grow_to(self, n: int) -> None:
        n = min(n, self.capacity)
        if n <= self._obs.shape[0]:
            return

        def grow(a, shape):
            out = np.zeros(shape)
            out[: a.shape[0]] = a
            return out

        self._obs = grow(self._obs, (n, self.obs_dim))
        self._action = grow(self._action, (n, self.action_dim))
        self._reward = grow(self._reward, (n,))
        self._next_obs = grow(self._next_obs, (n, self.obs_dim))
        self._done = grow(self._done, (n,))

    def add(self, transition: Transition) -> None:
        if self._cursor >= self._obs.shape[0]:
            self._grow_to(max(1024, 2 * self._obs.shape[0]))
        i = self._cursor
        self._obs[i] = transition.state
        self._action[i] = transition.action
        self._reward[i] = transition.reward
        self._next_obs[i] = transition.next_state
        self._done[i] = transition.done
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        if self._size < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            obs=self._obs[idx],
            action=self._action[idx],
            reward=self._reward[idx],
            next_obs=self._next_obs[idx],
            done=self._done[idx],
        )

    def state_arrays(self, prefix: str, arrays: Dict[str, np.ndarray]) -> None:
        n = self._size
        arrays[f"{prefix}.obs"] = self._obs[:n]
        arrays[f"{prefix}.action"] = self._action[:n]
        arrays[f"{prefix}.reward"] = self._reward[:n]
        arrays[f"{prefix}.next_obs"] = self._next_obs[:n]
        arrays[f"{prefix}.done"] = self._done[:n]
        arrays[f"{prefix}.cursor"] = np.array(float(self._cursor))

    def restore(self, prefix: str, arrays: Dict[str, np.ndarray]) -> None:
        obs = arrays[f"{prefix}.obs"]
        n = obs.shape[0]
        self._grow_to(max(n, 1))
        self._obs[:n] = obs
        self._action[:n] = arrays[f"{prefix}.action"]
        self._reward[:n] = arrays[f"{prefix}.reward"]
        self._next_obs[:n] = arrays[f"{prefix}.next_obs"]
        self._done[:n] = arrays[f"{prefix}.done"]
        self._size = n
        self._cursor = int(arrays[f"{prefix}.cursor"])


# ----------------------------------------------------------------------
# Temperature
@dataclass
class Temperature:
    """Trainable entropy weight, alpha = exp(log_alpha) > 0 by construction."""

    log_alpha: float
    target_entropy: float

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)


@dataclass
class _ScalarAdam:
    m: float = 0.0
    v: float = 0.0
    t: int = 0

    def step(self, x: float, grad: float, lr: float, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> float:
        if not math.isfinite(grad):
            raise FloatingPointError("non-finite temperature gradient")
        self.t += 1
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.v = beta2 * self.v + (1.0 - beta2) * grad * grad
        m_hat = self.m / (1.0 - beta1**self.t)
        v_hat = self.v / (1.0 - beta2**self.t)
        return x - lr * m_hat / (math.sqrt(v_hat) + eps)


# ----------------------------------------------------------------------
# Losses and their hand-derived gradients (all finite-difference checked).
def critic_target(batch: Batch, critics: TwinCritics, policy: PolicyNet,
                  alpha: float, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Soft bootstrap y = r + gamma (1 - done) (min target Q - alpha log pi)."""
    noise = rng.standard_normal((batch.next_obs.shape[0], policy.action_dim))
    next_action, next_log_prob, _ = _squash(policy, batch.next_obs, noise)
    q1, _ = critic_value(critics.target_q1, batch.next_obs, next_action)
    q2, _ = critic_value(critics.target_q2, batch.next_obs, next_action)
    soft_value = np.minimum(q1, q2) - alpha * next_log_prob
    return batch.reward + gamma * (1.0 - batch.done) * soft_value


def critic_loss_and_grads(params: DenseParams, obs: np.ndarray, action: np.ndarray,
                          y: np.ndarray) -> Tuple[float, DenseParams]:
    q, cache = critic_value(params, obs, action)
    diff = q - y
    loss = 0.5 * float(np.mean(diff**2))
    grad_out = (diff / diff.shape[0])[:, None]
    grads, _ = neural.backward(params, cache, grad_out)
    return loss, grads


def policy_loss_and_grads(policy: PolicyNet, critics: TwinCritics, alpha: float,
                          obs: np.ndarray, noise: np.ndarray):
    """Loss mean(alpha log pi - min Q) with its gradient w.r.t. the policy.

    The action is reparameterized (a = tanh(mean + std * noise) for the
    given noise), so gradients flow through both the log-probability and
    the critic input; critic parameters receive no update here.
    """
    batch_size = obs.shape[0]
    action, log_prob, aux = _squash(policy, obs, noise)
    q1, c1 = critic_value(critics.q1, obs, action)
    q2, c2 = critic_value(critics.q2, obs, action)
    q_min = np.minimum(q1, q2)
    loss = float(np.mean(alpha * log_prob - q_min))

    # d loss / d action, routed through whichever critic attains the min.
    take1 = (q1 <= q2).astype(float)[:, None]
    gout = -1.0 / batch_size
    _, gin1 = neural.backward(critics.q1, c1, gout * take1)
    _, gin2 = neural.backward(critics.q2, c2, gout * (1.0 - take1))
    obs_dim = obs.shape[1]
    dloss_daction = (gin1 + gin2)[:, obs_dim:]

    tanh_u = action
    std, eps = aux["std"], aux["noise"]
    one_minus_a2 = 1.0 - tanh_u**2
    # Total reparameterized derivatives of log pi: 2 tanh(u) w.r.t. the
    # mean, 2 eps std tanh(u) - 1 w.r.t. log std.
    g_mean = alpha * 2.0 * tanh_u / batch_size + dloss_daction * one_minus_a2
    g_log_std = (
        alpha * (2.0 * eps * std * tanh_u - 1.0) / batch_size
        + dloss_daction * one_minus_a2 * eps * std
    ) * aux["clamp_mask"]
    grads, _ = neural.backward(policy.params, aux["cache"],
                               np.concatenate([g_mean, g_log_std], axis=1))
    return loss, grads, log_prob


def temperature_loss_and_grad(log_alpha: float, log_prob: np.ndarray,
                              target_entropy: float) -> Tuple[float, float]:
    err = float(np.mean(log_prob + target_entropy))
    return -log_alpha * err, -err


# ----------------------------------------------------------------------
@dataclass
class UpdateInfo:
    critic1_loss: float
    critic2_loss: float
    policy_loss: float
    alpha_loss: float
    alpha: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in
                   (self.critic1_loss, self.critic2_loss, self.policy_loss,
                    self.alpha_loss, self.alpha))


class SacAgent:
    """Networks, optimizers and temperature bundled with their update rules."""

    def __init__(self, policy: PolicyNet, critics: TwinCritics,
                 temperature: Temperature, config: TrainConfig):
        self.policy = policy
        self.critics = critics
        self.temperature = temperature
        self.config = config
        self.opt_policy = AdamState.zeros_like(policy.params)
        self.opt_q1 = AdamState.zeros_like(critics.q1)
        self.opt_q2 = AdamState.zeros_like(critics.q2)
        self.opt_alpha = _ScalarAdam()

    @classmethod
    def create(cls, seed: int, obs_dim: int, action_dim: int, config: TrainConfig) -> "SacAgent":
        net_seeds = np.random.SeedSequence((seed, 0)).generate_state(3)
        policy = PolicyNet.create(int(net_seeds[0]), obs_dim, action_dim)
        critics = TwinCritics.create(int(net_seeds[1]), int(net_seeds[2]), obs_dim, action_dim)
        target_entropy = config.target_entropy
        if target_entropy is None:
            target_entropy = -float(action_dim)
        temperature = Temperature(log_alpha=config.initial_log_alpha, target_entropy=target_entropy)
        return cls(policy, critics, temperature, config)

    # -------------------------------------------------------- acting
    def sample_action(self, obs, rng) -> Tuple[np.ndarray, float]:
        return sample_action(self.policy, obs, rng)

    def deterministic_action(self, obs) -> np.ndarray:
        return deterministic_action(self.policy, obs)

    # -------------------------------------------------------- updates
    def update_critics(self, batch: Batch, y: np.ndarray) -> Tuple[float, float]:
        lr = self.config.learning_rate
        loss1, grads1 = critic_loss_and_grads(self.critics.q1, batch.obs, batch.action, y)
        self.critics.q1, self.opt_q1 = neural.adam_step(self.critics.q1, grads1, self.opt_q1, lr=lr)
        loss2, grads2 = critic_loss_and_grads(self.critics.q2, batch.obs, batch.action, y)
        self.critics.q2, self.opt_q2 = neural.adam_step(self.critics.q2, grads2, self.opt_q2, lr=lr)
        return loss1, loss2

    def update_policy(self, batch: Batch, rng: np.random.Generator) -> Tuple[float, np.ndarray]:
        noise = rng.standard_normal((batch.obs.shape[0], self.policy.action_dim))
        loss, grads, log_prob = policy_loss_and_grads(
            self.policy, self.critics, self.temperature.alpha, batch.obs, noise
        )
        self.policy.params, self.opt_policy = neural.adam_step(
            self.policy.params, grads, self.opt_policy, lr=self.config.learning_rate
        )
        return loss, log_prob

    def update_temperature(self, log_prob: np.ndarray) -> float:
        loss, grad = temperature_loss_and_grad(
            self.temperature.log_alpha, log_prob, self.temperature.target_entropy
        )
        self.temperature.log_alpha = self.opt_alpha.step(
            self.temperature.log_alpha, grad, lr=self.config.learning_rate
        )
        return loss

    def update(self, batch: Batch, rng: np.random.Generator) -> UpdateInfo:
        y = critic_target(batch, self.critics, self.policy,
                          self.temperature.alpha, self.config.gamma, rng)
        loss1, loss2 = self.update_critics(batch, y)
        policy_loss, log_prob = self.update_policy(batch, rng)
        alpha_loss = self.update_temperature(log_prob)
        tau = self.config.tau
        self.critics.target_q1 = soft_update(self.critics.q1, self.critics.target_q1, tau)
        self.critics.target_q2 = soft_update(self.critics.q2, self.critics.target_q2, tau)
        info = UpdateInfo(loss1, loss2, policy_loss, alpha_loss, self.temperature.alpha)
        if not info.is_finite():
            raise FloatingPointError(f"non-finite update: {info}")
        return info


# ----------------------------------------------------------------------
# Training loop
@dataclass
class EpisodeMetrics:
    episode: int
    env_steps: int
    updates: int
    episode_return: float
    r_dist_total: float
    r_align_total: float
    r_surr_total: float
    r_contact_total: float
    success: bool
    critic1_loss: float
    critic2_loss: float
    policy_loss: float
    alpha_loss: float
    alpha: float
    buffer_size: int

    COLUMNS = (
        "episode", "env_steps", "updates", "episode_return",
        "r_dist_total", "r_align_total", "r_surr_total", "r_contact_total",
        "success", "critic1_loss", "critic2_loss", "policy_loss",
        "alpha_loss", "alpha", "buffer_size",
    )

    def to_row(self) -> List[str]:
        return [
            str(self.episode), str(self.env_steps), str(self.updates),
            repr(self.episode_return),
            repr(self.r_dist_total), repr(self.r_align_total),
            repr(self.r_surr_total), repr(self.r_contact_total),
            str(int(self.success)),
            repr(self.critic1_loss), repr(self.critic2_loss),
            repr(self.policy_loss), repr(self.alpha_loss), repr(self.alpha),
            str(self.buffer_size),
        ]


def episode_seed(master_seed: int, episode: int, stream: int = 3) -> int:
    """Stateless per-episode environment seed, stable across resumes."""
    return int(np.random.SeedSequence((master_seed, stream, episode)).generate_state(1)[0])


class Trainer:
    """Owns the agent, buffer and RNG streams; checkpoints capture enough
    state that a resumed run reproduces the uninterrupted metrics stream."""

    def __init__(self, env, config: TrainConfig):
        self.env = env
        self.config = config
        self.agent = SacAgent.create(config.seed, env.observation_dim, env.action_dim, config)
        self.buffer = ReplayBuffer(config.buffer_capacity, env.observation_dim, env.action_dim)
        self.rng_act = np.random.default_rng(np.random.SeedSequence((config.seed, 1)))
        self.rng_learn = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))
        self.episode = 0
        self.env_steps = 0
        self.updates = 0
        self._last_update: Optional[UpdateInfo] = None

    def run(self) -> Iterator[EpisodeMetrics]:
        while self.episode < self.config.episodes:
            metrics = self._run_episode(self.episode)
            self.episode += 1
            yield metrics

    def _run_episode(self, ep: int) -> EpisodeMetrics:
        cfg = self.config
        obs = self.env.reset(episode_seed(cfg.seed, ep))
        totals = np.zeros(4)
        episode_return = 0.0
        for _ in range(self.env.config.episode_length):
            if self.env_steps < cfg.warmup_steps:
                action = self.rng_act.uniform(-1.0, 1.0, self.env.action_dim)
            else:
                action, _ = self.agent.sample_action(obs, self.rng_act)
            result = self.env.step(action)
            self.buffer.add(Transition(obs, action, result.reward, result.obs, float(result.done)))
            obs = result.obs
            self.env_steps += 1
            episode_return += result.reward
            totals += np.array(result.terms)
            if (
                self.env_steps >= cfg.warmup_steps
                and self.env_steps % cfg.train_freq == 0
                and len(self.buffer) >= cfg.batch_size
            ):
                try:
                    self._last_update = self.agent.update(
                        self.buffer.sample(self.rng_learn, cfg.batch_size), self.rng_learn
                    )
                except FloatingPointError as exc:
                    raise RuntimeError(f"training halted at env step {self.env_steps}: {exc}") from exc
                self.updates += 1
        last = self._last_update
        nan = float("nan")
        return EpisodeMetrics(
            episode=ep,
            env_steps=self.env_steps,
            updates=self.updates,
            episode_return=episode_return,
            r_dist_total=float(totals[0]),
            r_align_total=float(totals[1]),
            r_surr_total=float(totals[2]),
            r_contact_total=float(totals[3]),
            success=self.env.is_success(),
            critic1_loss=last.critic1_loss if last else nan,
            critic2_loss=last.critic2_loss if last else nan,
            policy_loss=last.policy_loss if last else nan,
            alpha_loss=last.alpha_loss if last else nan,
            alpha=self.agent.temperature.alpha,
            buffer_size=len(self.buffer),
        )

    # -------------------------------------------------------- persistence
    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = {}
        neural.pack_params("policy", self.agent.policy.params, arrays)
        neural.pack_params("q1", self.agent.critics.q1, arrays)
        neural.pack_params("q2", self.agent.critics.q2, arrays)
        neural.pack_params("target_q1", self.agent.critics.target_q1, arrays)
        neural.pack_params("target_q2", self.agent.critics.target_q2, arrays)
        for name, opt in (("policy", self.agent.opt_policy),
                          ("q1", self.agent.opt_q1), ("q2", self.agent.opt_q2)):
            neural.pack_params(f"adam.{name}.m", opt.m, arrays)
            neural.pack_params(f"adam.{name}.v", opt.v, arrays)
            arrays[f"adam.{name}.t"] = np.array(float(opt.t))
        arrays["adam.alpha"] = np.array(
            [self.agent.opt_alpha.m, self.agent.opt_alpha.v, float(self.agent.opt_alpha.t)]
        )
        self.buffer.state_arrays("buffer", arrays)
        meta = {
            "version": 1,
            "obs_dim": self.env.observation_dim,
            "action_dim": self.env.action_dim,
            "tactile": bool(self.env.config.tactile_enabled),
            "episode": self.episode,
            "env_steps": self.env_steps,
            "updates": self.updates,
            "log_alpha": self.agent.temperature.log_alpha,
            "target_entropy": self.agent.temperature.target_entropy,
            "seed": self.config.seed,
            "rng_act": self.rng_act.bit_generator.state,
            "rng_learn": self.rng_learn.bit_generator.state,
        }
        arrays["meta"] = _json_to_array(meta)
        return arrays

    def save(self, path) -> None:
        neural.save_arrays(path, self.state_arrays())

    @classmethod
    def load(cls, path, env, config: TrainConfig) -> "Trainer":
        arrays = neural.load_arrays(path)
        meta = _json_from_array(arrays["meta"])
        if meta["obs_dim"] != env.observation_dim or meta["action_dim"] != env.action_dim:
            raise ValueError(
                f"checkpoint built for obs/action dims "
                f"({meta['obs_dim']}, {meta['action_dim']}), environment has "
                f"({env.observation_dim}, {env.action_dim})"
            )
        trainer = cls(env, config)
        agent = trainer.agent
        agent.policy.params = neural.unpack_params("policy", arrays)
        agent.critics.q1 = neural.unpack_params("q1", arrays)
        agent.critics.q2 = neural.unpack_params("q2", arrays)
        agent.critics.target_q1 = neural.unpack_params("target_q1", arrays)
        agent.critics.target_q2 = neural.unpack_params("target_q2", arrays)
        for name, setter in (("policy", "opt_policy"), ("q1", "opt_q1"), ("q2", "opt_q2")):
            state = AdamState(
                m=neural.unpack_params(f"adam.{name}.m", arrays),
                v=neural.unpack_params(f"adam.{name}.v", arrays),
                t=int(arrays[f"adam.{name}.t"]),
            )
            setattr(agent, setter, state)
        alpha_opt = arrays["adam.alpha"]
        agent.opt_alpha = _ScalarAdam(m=float(alpha_opt[0]), v=float(alpha_opt[1]), t=int(alpha_opt[2]))
        agent.temperature.log_alpha = float(meta["log_alpha"])
        agent.temperature.target_entropy = float(meta["target_entropy"])
        trainer.buffer.restore("buffer", arrays)
        trainer.episode = int(meta["episode"])
        trainer.env_steps = int(meta["env_steps"])
        trainer.updates = int(meta["updates"])
        trainer.rng_act.bit_generator.state = meta["rng_act"]
        trainer.rng_learn.bit_generator.state = meta["rng_learn"]
        return trainer


def train(env, config: TrainConfig) -> Iterator[EpisodeMetrics]:
    """Run the full training loop, yielding one metrics record per episode."""
    yield from Trainer(env, config).run()


def load_policy(path) -> Tuple[PolicyNet, Dict]:
    """Read just the policy and checkpoint metadata, for evaluation."""
    arrays = neural.load_arrays(path)
    meta = _json_from_array(arrays["meta"])
    params = neural.unpack_params("policy", arrays)
    return PolicyNet(params=params, action_dim=int(meta["action_dim"])), meta


def _json_to_array(obj) -> np.ndarray:
    return np.frombuffer(json.dumps(obj, sort_keys=True).encode("utf-8"), dtype=np.uint8).astype(float)


def _json_from_array(arr: np.ndarray):
    return json.loads(arr.astype(np.uint8).tobytes().decode("utf-8"))
