"""DDPG agent and the episode training loop for the offloading environment."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .env import REWARD_TERMS, SecureOffloadEnv
from .nn import MLP, AdamState, adam_step

log = logging.getLogger(__name__)

HIDDEN_SIZES = (64, 128, 256, 256, 128, 64)


class BufferNotReady(RuntimeError):
    """Sampling was requested before the buffer holds a full mini-batch."""


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1000
    batch: int = 128
    capacity: int = 10000
    lr_actor: float = 1e-4
    lr_critic: float = 6e-4
    tau: float = 1e-3
    discount: float = 0.99
    noise_initial: float = 0.2
    noise_floor: float = 0.02
    noise_floor_fraction: float = 0.8
    hidden: tuple = HIDDEN_SIZES
    dtype: str = "float32"
    seed: int = 0

    def validate(self) -> None:
        if self.episodes <= 0 or self.batch <= 0:
            raise ValueError("episodes and batch must be positive")
        if self.batch > self.capacity:
            raise ValueError("batch larger than replay capacity")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.noise_initial < 0 or self.noise_floor < 0 or self.noise_floor > self.noise_initial:
            raise ValueError("need 0 <= noise_floor <= noise_initial")


def noise_sigma(episode: int, cfg: TrainConfig) -> float:
    """Exploration std for an episode: exponential decay down to a floor.

    The decay rate is chosen so the floor is reached after
    ``noise_floor_fraction`` of the training episodes.
    """
    if cfg.noise_initial == 0.0 or cfg.noise_floor == cfg.noise_initial:
        return cfg.noise_initial
    if cfg.noise_floor == 0.0:
        horizon = max(cfg.noise_floor_fraction * cfg.episodes, 1.0)
        return cfg.noise_initial * max(1.0 - episode / horizon, 0.0)
    horizon = max(cfg.noise_floor_fraction * cfg.episodes, 1.0)
    decay = (cfg.noise_floor / cfg.noise_initial) ** (1.0 / horizon)
    return max(cfg.noise_initial * decay ** episode, cfg.noise_floor)


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, dtype=np.float64):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.actions = np.zeros((capacity, action_dim), dtype=dtype)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.dones = np.zeros(capacity, dtype=dtype)
        self.count = 0  # total pushes

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def push(self, state, action, reward, next_state, done) -> None:
        i = self.count % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.count += 1

    def sample(self, batch: int, rng: np.random.Generator):
        """Uniform draw with replacement over the current contents."""
        if len(self) < batch:
            raise BufferNotReady(f"{len(self)} transitions stored, need {batch}")
        idx = rng.integers(0, len(self), size=batch)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]


def act_with_noise(actor: MLP, state_vec, sigma: float, rng: np.random.Generator) -> np.ndarray:
    action = actor(state_vec).astype(np.float64)
    if sigma > 0:
        action = action + rng.normal(0.0, sigma, size=action.shape)
    return np.clip(action, 0.0, 1.0)


def critic_update(critic: MLP, target_actor: MLP, target_critic: MLP, batch, discount: float,
                  lr: float, adam: AdamState) -> float:
    """One gradient step on the squared TD error; returns the pre-update loss."""
    s, a, r, s2, done = batch
    q_next = target_critic(np.hstack([s2, target_actor(s2)]))[:, 0]
    y = r + discount * (1.0 - done) * q_next
    q, cache = critic.forward(np.hstack([s, a]))
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    grads, _ = critic.backward(cache, (2.0 / len(y)) * err[:, None])
    adam_step(critic.flat, grads, adam, lr)
    critic.touch()
    return loss


def actor_update(actor: MLP, critic: MLP, states, lr: float, adam: AdamState) -> float:
    """Ascend mean Q(s, mu(s)) through the critic's action gradient; returns pre-update mean Q."""
    a, cache_a = actor.forward(states)
    q, cache_c = critic.forward(np.hstack([states, a]))
    n, s_dim = states.shape
    _, grad_in = critic.backward(cache_c, np.full((n, 1), -1.0 / n), param_grads=False)
    grads, _ = actor.backward(cache_a, grad_in[:, s_dim:])
    adam_step(actor.flat, grads, adam, lr)
    actor.touch()
    return float(q.mean())


class DDPGAgent:
    def __init__(self, state_dim: int, action_dim: int, cfg: TrainConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.state_dim, self.action_dim = state_dim, action_dim
        self.actor = MLP([state_dim, *cfg.hidden, action_dim], "sigmoid", rng, dtype=cfg.dtype)
        self.critic = MLP([state_dim + action_dim, *cfg.hidden, 1], "identity", rng, dtype=cfg.dtype)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = AdamState.for_params(self.actor.flat)
        self.critic_adam = AdamState.for_params(self.critic.flat)

    def act(self, state_vec, sigma: float = 0.0, rng=None) -> np.ndarray:
        if sigma > 0 and rng is None:
            raise ValueError("noisy action needs an rng")
        return act_with_noise(self.actor, state_vec, sigma, rng)

    def update(self, batch) -> tuple[float, float]:
        c = self.cfg
        loss = critic_update(self.critic, self.target_actor, self.target_critic, batch, c.discount,
                             c.lr_critic, self.critic_adam)
        objective = actor_update(self.actor, self.critic, batch[0], c.lr_actor, self.actor_adam)
        self.target_critic.soft_update_from(self.critic, c.tau)
        self.target_actor.soft_update_from(self.actor, c.tau)
        return loss, objective


@dataclass
class EpisodeMetrics:
    episode: int
    accumulated_reward: float
    average_cost: float
    energy_cost: float
    delay_cost: float
    episode_length: int
    finished: int
    leftover_bits: float
    collisions: int
    capacity_violations: int
    gate_blocked: int
    offloaded_bits: float
    local_bits: float
    uav_energy_j: float
    noise_sigma: float
    updates: int
    critic_loss: float
    actor_objective: float
    reward_offload: float = 0.0
    reward_collision: float = 0.0
    reward_capacity: float = 0.0
    reward_leftover: float = 0.0
    reward_cost: float = 0.0
    wall_time_s: float = field(default=0.0, compare=False)

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("wall_time_s")
        return row


def run_episode(env: SecureOffloadEnv, policy, episode: int = 0, sigma: float = 0.0,
                on_step=None) -> tuple[EpisodeMetrics, list]:
    """Roll out one episode with ``policy(obs) -> raw action``.

    ``on_step(obs, action, outcome, next_obs)`` is called after every slot and
    may return ``(critic_loss, actor_objective)`` when it trained.  Returns
    the episode metrics and the per-slot trajectory rows.
    """
    t0 = time.perf_counter()
    env.reset()
    obs = env.observe()
    total_reward, steps = 0.0, 0
    sums = dict.fromkeys(REWARD_TERMS, 0.0)
    counts = {"collisions": 0, "capacity_violations": 0, "gate_blocked": 0}
    offloaded = local = 0.0
    losses, objectives = [], []
    trajectory = []
    done = False
    while not done:
        action = policy(obs)
        out = env.step(action)
        next_obs = env.observe()
        if on_step is not None:
            stats = on_step(obs, action, out, next_obs)
            if stats is not None:
                losses.append(stats[0])
                objectives.append(stats[1])
        info = out.info
        total_reward += out.reward
        for term in REWARD_TERMS:
            sums[term] += info["breakdown"][term]
        counts["collisions"] += int(info["collision"])
        counts["capacity_violations"] += int(info["capacity_violation"])
        counts["gate_blocked"] += info["gate_blocked"]
        offloaded += float(info["bits_offloaded"].sum())
        local += float(info["bits_local"].sum())
        trajectory.append(_trajectory_row(steps, out))
        obs, done = next_obs, out.done
        steps += 1
    cost = env.episode_cost()
    metrics = EpisodeMetrics(
        episode=episode,
        accumulated_reward=total_reward,
        average_cost=cost["average_cost"],
        energy_cost=cost["energy_cost"],
        delay_cost=cost["delay_cost"],
        episode_length=steps,
        finished=int(out.info["finished"]),
        leftover_bits=float(out.next_state.remaining_bits.sum()),
        offloaded_bits=offloaded,
        local_bits=local,
        uav_energy_j=env.ledger.spent_j,
        noise_sigma=sigma,
        updates=len(losses),
        critic_loss=float(np.mean(losses)) if losses else math.nan,
        actor_objective=float(np.mean(objectives)) if objectives else math.nan,
        **counts,
        **{f"reward_{t}": v for t, v in sums.items()},
        wall_time_s=time.perf_counter() - t0,
    )
    return metrics, trajectory


def _trajectory_row(slot: int, out) -> dict:
    st, info = out.next_state, out.info
    row = {"slot": slot, "x": float(st.uav_pos[0]), "y": float(st.uav_pos[1]), "z": float(st.uav_pos[2]),
           "speed_mps": float(info["speed_mps"]), "residual_energy_j": st.residual_energy_j, "reward": out.reward}
    for k in range(len(st.remaining_bits)):
        row[f"power_w_{k}"] = float(info["power_w"][k])
        row[f"freq_hz_{k}"] = float(info["freq_hz"][k])
        row[f"secrecy_bps_{k}"] = float(st.secrecy_bps[k])
        row[f"remaining_bits_{k}"] = float(st.remaining_bits[k])
    return row


def train(env: SecureOffloadEnv, cfg: TrainConfig, progress_every: int = 0):
    """Train a DDPG agent on ``env``; returns ``(agent, metrics_per_episode)``.

    Deterministic for a given ``cfg.seed``: network init, exploration noise and
    mini-batch sampling draw from independent child streams of that seed.
    """
    cfg.validate()
    init_ss, noise_ss, sample_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    noise_rng = np.random.default_rng(noise_ss)
    sample_rng = np.random.default_rng(sample_ss)
    s_dim, a_dim = env.config.state_dim, env.config.action_dim
    agent = DDPGAgent(s_dim, a_dim, cfg, np.random.default_rng(init_ss))
    buffer = ReplayBuffer(cfg.capacity, s_dim, a_dim, dtype=cfg.dtype)

    def on_step(obs, action, out, next_obs):
        buffer.push(obs, action, out.reward, next_obs, out.done)
        if len(buffer) < cfg.batch:
            return None
        return agent.update(buffer.sample(cfg.batch, sample_rng))

    history = []
    for ep in range(cfg.episodes):
        sigma = noise_sigma(ep, cfg)
        metrics, _ = run_episode(env, lambda o: agent.act(o, sigma, noise_rng), ep, sigma, on_step)
        history.append(metrics)
        if progress_every and (ep + 1) % progress_every == 0:
            log.info("episode %d reward %.3f cost %.3f len %d", ep + 1, metrics.accumulated_reward,
                     metrics.average_cost, metrics.episode_length)
    return agent, history


def evaluate(env: SecureOffloadEnv, actor: MLP) -> tuple[EpisodeMetrics, list]:
    """Greedy rollout of a frozen actor; returns metrics and per-slot trajectory."""
    return run_episode(env, lambda o: act_with_noise(actor, o, 0.0, None))
