"""Episode simulator for secure NOMA/TDMA offloading to a UAV-mounted server.

The agent picks, every slot, the UAV velocity in spherical coordinates plus
each user's transmit power and CPU frequency.  Actions arrive normalised to
[0, 1] and states leave normalised to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, mec, rates
from .channel import ChannelParams, EavesdropperRegion, GroundPosition
from .mec import ComputeParams, CostWeights, EnergyLedger, PropulsionParams


class ConfigError(ValueError):
    """Invalid environment or experiment configuration."""


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping an environment whose episode is already over."""


DEFAULT_USERS = ((100.0, 350.0), (270.0, 290.0), (180.0, 230.0), (330.0, 110.0), (235.0, 125.0))


@dataclass(frozen=True)
class NetworkLayout:
    users: tuple = DEFAULT_USERS
    jammer: tuple = (300.0, 250.0)
    eve_center: tuple = (290.0, 150.0)
    eve_radius_m: float = 25.0
    eve_altitude_m: float = 100.0
    uav_start: tuple = (0.0, 250.0, 100.0)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def eve_region(self) -> EavesdropperRegion:
        return EavesdropperRegion(GroundPosition(*self.eve_center), self.eve_radius_m, self.eve_altitude_m)


@dataclass(frozen=True)
class RewardConsts:
    kappa_f: float = 2.5e-7
    kappa_ac: float = 1.0
    kappa_rc: float = 10.0
    zeta: float = 1e-7


@dataclass(frozen=True)
class EnvConfig:
    layout: NetworkLayout = field(default_factory=NetworkLayout)
    channel: ChannelParams = field(default_factory=ChannelParams)
    compute: ComputeParams = field(default_factory=ComputeParams)
    propulsion: PropulsionParams = field(default_factory=PropulsionParams)
    weights: CostWeights = field(default_factory=CostWeights)
    reward: RewardConsts = field(default_factory=RewardConsts)
    bandwidth_hz: float = 1e6
    jammer_power_w: float = 0.1
    v_max_mps: float = 20.0
    z_min_m: float = 100.0
    z_max_m: float = 150.0
    d_min_m: float = 10.0
    p_max_w: float = 0.1
    secrecy_threshold_bps: float = 0.9e6
    bits_per_user: float = 100e6
    energy_budget_j: float = 20000.0
    max_slots: int = 400
    arena: tuple = (500.0, 500.0)
    mode: str = "noma"

    def validate(self) -> None:
        if self.z_min_m >= self.z_max_m:
            raise ConfigError("z_min must be below z_max")
        if self.v_max_mps <= 0 or self.p_max_w <= 0 or self.bandwidth_hz <= 0:
            raise ConfigError("v_max, p_max and bandwidth must be positive")
        if self.max_slots <= 0:
            raise ConfigError("max_slots must be positive")
        if min(vars(self.reward).values()) <= 0:
            raise ConfigError("reward constants must be positive")
        if self.mode not in ("noma", "tdma"):
            raise ConfigError(f"unknown access mode {self.mode!r}")
        if self.layout.num_users < 1:
            raise ConfigError("at least one user is required")
        if self.bits_per_user <= 0 or self.energy_budget_j <= 0:
            raise ConfigError("task size and energy budget must be positive")
        if self.jammer_power_w < 0 or self.secrecy_threshold_bps < 0 or self.d_min_m < 0:
            raise ConfigError("jammer power, secrecy threshold and d_min must be non-negative")
        if min(self.arena) <= 0:
            raise ConfigError("arena extents must be positive")
        if not (self.z_min_m <= self.layout.uav_start[2] <= self.z_max_m):
            raise ConfigError("UAV start altitude outside [z_min, z_max]")
        w = self.weights
        if not math.isclose(w.w_energy + w.w_delay, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ConfigError("cost weights must sum to 1")

    @property
    def num_users(self) -> int:
        return self.layout.num_users

    @property
    def state_dim(self) -> int:
        return 2 * self.num_users + 13

    @property
    def action_dim(self) -> int:
        return 3 + 2 * self.num_users

    def max_secrecy_rate(self) -> float:
        """Normaliser for secrecy rates: best single-user rate, UAV overhead at Z_min."""
        h_best = channel.gain_at_distance(self.z_min_m, self.z_min_m, self.channel)
        return self.bandwidth_hz * math.log2(1.0 + h_best * self.p_max_w / self.channel.noise_power_s_w)


@dataclass
class EnvState:
    uav_pos: np.ndarray
    residual_energy_j: float
    secrecy_bps: np.ndarray
    remaining_bits: np.ndarray
    slot_index: int = 0

    def copy(self) -> "EnvState":
        return EnvState(self.uav_pos.copy(), self.residual_energy_j, self.secrecy_bps.copy(),
                        self.remaining_bits.copy(), self.slot_index)


@dataclass
class Action:
    speed_mps: float
    polar_rad: float
    azimuth_rad: float
    power_w: np.ndarray
    freq_hz: np.ndarray


@dataclass
class StepOutcome:
    next_state: EnvState
    reward: float
    done: bool
    info: dict


REWARD_TERMS = ("offload", "collision", "capacity", "leftover", "cost")


def kinematics_update(pos, action: Action, slot_s: float, config: EnvConfig) -> np.ndarray:
    """Move the UAV for one slot, then clip to the altitude band and the arena."""
    step = action.speed_mps * slot_s
    sin_t = math.sin(action.polar_rad)
    new = np.array([
        pos[0] + step * sin_t * math.cos(action.azimuth_rad),
        pos[1] + step * sin_t * math.sin(action.azimuth_rad),
        pos[2] + step * math.cos(action.polar_rad),
    ])
    new[0] = min(max(new[0], 0.0), config.arena[0])
    new[1] = min(max(new[1], 0.0), config.arena[1])
    new[2] = min(max(new[2], config.z_min_m), config.z_max_m)
    return new


def encode_state(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Normalised feature vector of length 2K + 13.

    Position (3 values) is repeated cyclically to 8 features and residual
    energy to 5, so the UAV part is not drowned out by the 2K user features.
    """
    pos = np.asarray(state.uav_pos, dtype=float) / np.array([config.arena[0], config.arena[1], config.z_max_m])
    energy = state.residual_energy_j / config.energy_budget_j
    feats = np.concatenate([
        np.resize(pos, 8),
        np.full(5, energy),
        np.asarray(state.secrecy_bps, dtype=float) / config.max_secrecy_rate(),
        np.asarray(state.remaining_bits, dtype=float) / config.bits_per_user,
    ])
    return np.clip(feats, 0.0, 1.0)


def decode_action(raw, config: EnvConfig) -> Action:
    raw = np.clip(np.asarray(raw, dtype=float), 0.0, 1.0)
    k = config.num_users
    if raw.shape != (3 + 2 * k,):
        raise ValueError(f"expected action of length {3 + 2 * k}, got {raw.shape}")
    return Action(
        speed_mps=raw[0] * config.v_max_mps,
        polar_rad=raw[1] * math.pi,
        azimuth_rad=raw[2] * 2.0 * math.pi,
        power_w=raw[3:3 + k] * config.p_max_w,
        freq_hz=raw[3 + k:] * config.compute.f_user_max_hz,
    )


def compute_reward(effects: dict, config: EnvConfig) -> tuple[float, dict]:
    """Slot reward and its breakdown.

    ``effects`` carries: ``secrecy_bps`` and ``was_active`` (per user),
    ``collision`` and ``capacity_violation`` flags, ``leftover_bits`` (only
    non-zero on the terminal slot) and ``slot_cost``.
    """
    rc = config.reward
    offload = rc.kappa_f * config.compute.slot_s * float(np.sum(effects["was_active"] * effects["secrecy_bps"]))
    breakdown = {
        "offload": offload,
        "collision": -rc.kappa_ac if effects["collision"] else 0.0,
        "capacity": -rc.kappa_rc if effects["capacity_violation"] else 0.0,
        "leftover": -rc.zeta * effects["leftover_bits"],
        "cost": -effects["slot_cost"],
    }
    reward = 0.0
    for term in REWARD_TERMS:
        reward += breakdown[term]
    return reward, breakdown


class SecureOffloadEnv:
    """Single-UAV secure offloading MDP, NOMA or TDMA uplink.

    One driver at a time; create separate instances for parallel rollouts.
    """

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        self._users = np.asarray(config.layout.users, dtype=float)
        self._r_max = config.max_secrecy_rate()
        self._eve_links = self._eavesdropper_links()
        self.state: EnvState | None = None
        self.done = True

    def _eavesdropper_links(self) -> dict:
        """Worst-case gains towards the eavesdropper disk; independent of the UAV."""
        cfg, region = self.config, self.config.layout.eve_region
        z_e = region.altitude_m
        d_lb = np.array([channel.worst_case_distance_bounds(GroundPosition(*u), region, "user") for u in self._users])
        d_ub = np.array([channel.worst_case_distance_bounds(GroundPosition(*u), region, "interferer")
                         for u in self._users])
        d_j = channel.worst_case_distance_bounds(GroundPosition(*cfg.layout.jammer), region, "jammer")
        d_center = np.sqrt(z_e ** 2 + np.sum((self._users - np.asarray(cfg.layout.eve_center)) ** 2, axis=1))
        return {
            "worst_gain": channel.gain_at_distance(d_lb, z_e, cfg.channel),
            "interferer_gain": channel.gain_at_distance(d_ub, z_e, cfg.channel),
            "jammer_gain": float(channel.gain_at_distance(d_j, z_e, cfg.channel)),
            "order_loss": channel.path_loss_from_geometry(z_e, d_center, cfg.channel),
        }

    def link_snapshot(self, uav_pos) -> rates.LinkSnapshot:
        horiz2 = np.sum((self._users - np.asarray(uav_pos[:2])) ** 2, axis=1)
        dist = np.sqrt(horiz2 + uav_pos[2] ** 2)
        loss_s = channel.path_loss_from_geometry(uav_pos[2], dist, self.config.channel)
        eve = self._eve_links
        return rates.LinkSnapshot(
            gain_to_server=channel.channel_gain(loss_s),
            worst_gain_to_eve=eve["worst_gain"],
            worst_interferer_gain_to_eve=eve["interferer_gain"],
            jammer_gain_to_eve_lb=eve["jammer_gain"],
            loss_to_server_db=loss_s,
            loss_to_eve_db=eve["order_loss"],
            noise_server_w=self.config.channel.noise_power_s_w,
            noise_eve_w=self.config.channel.noise_power_e_w,
        )

    def secrecy_rates(self, uav_pos, power_w) -> np.ndarray:
        links = self.link_snapshot(uav_pos)
        powers = rates.PowerAllocation(power_w, self.config.jammer_power_w)
        if self.config.mode == "tdma":
            return rates.tdma_secrecy_rates(links, powers, self.config.bandwidth_hz, self.config.num_users)
        return rates.noma_secrecy_rates(links, powers, self.config.bandwidth_hz)

    def distance_to_eve_region(self, uav_pos) -> float:
        """Distance from the UAV to the nearest possible eavesdropper position."""
        lay = self.config.layout
        horiz = math.hypot(uav_pos[0] - lay.eve_center[0], uav_pos[1] - lay.eve_center[1])
        return math.hypot(max(horiz - lay.eve_radius_m, 0.0), uav_pos[2] - lay.eve_altitude_m)

    def reset(self, seed: int | None = None) -> EnvState:
        # the dynamics are deterministic; the seed is accepted for interface symmetry
        k = self.config.num_users
        self.state = EnvState(
            uav_pos=np.asarray(self.config.layout.uav_start, dtype=float).copy(),
            residual_energy_j=self.config.energy_budget_j,
            secrecy_bps=np.zeros(k),
            remaining_bits=np.full(k, float(self.config.bits_per_user)),
            slot_index=0,
        )
        self.ledger = EnergyLedger(budget_j=self.config.energy_budget_j)
        self.user_energy_j = np.zeros(k)
        self.user_delay_s = np.zeros(k)
        self.done = False
        return self.state.copy()

    def observe(self) -> np.ndarray:
        return encode_state(self.state, self.config)

    def step(self, raw_action) -> StepOutcome:
        if self.done or self.state is None:
            raise EpisodeFinishedError("episode is finished; call reset()")
        cfg, st = self.config, self.state
        comp, k = cfg.compute, cfg.num_users
        act = decode_action(raw_action, cfg)
        was_active = st.remaining_bits > 0
        # users with nothing left stay silent and idle
        power = np.where(was_active, act.power_w, 0.0)
        freq = np.where(was_active, act.freq_hz, 0.0)

        pos = kinematics_update(st.uav_pos, act, comp.slot_s, cfg)
        secrecy = self.secrecy_rates(pos, power)
        airtime = 1.0 / k if cfg.mode == "tdma" else 1.0
        bits_off, e_off = mec.offload_step(secrecy, power, comp, cfg.secrecy_threshold_bps, airtime)
        bits_loc, e_loc = mec.local_step(freq, comp)
        _, f_total, e_server, capacity_ok = mec.server_load(bits_off, comp)
        e_fly = mec.propulsion_power(act.speed_mps, cfg.propulsion) * comp.slot_s
        self.ledger = mec.energy_update(self.ledger, e_fly, e_server)

        remaining = np.maximum(st.remaining_bits - bits_loc - bits_off, 0.0)
        slot_energy = e_loc + e_off
        slot_delay = comp.slot_s * was_active
        self.user_energy_j += slot_energy
        self.user_delay_s += slot_delay
        w = cfg.weights
        slot_cost = mec.episode_cost(float(slot_energy.sum()), float(slot_delay.sum()), w, k)

        slot = st.slot_index + 1
        finished = bool(np.all(remaining <= 0))
        done = finished or self.ledger.exhausted or slot >= cfg.max_slots
        collision = self.distance_to_eve_region(pos) < cfg.d_min_m
        effects = {
            "secrecy_bps": secrecy,
            "was_active": was_active,
            "collision": collision,
            "capacity_violation": not capacity_ok,
            "leftover_bits": float(remaining.sum()) if done else 0.0,
            "slot_cost": slot_cost,
        }
        reward, breakdown = compute_reward(effects, cfg)

        self.state = EnvState(pos, self.ledger.residual_j, secrecy, remaining, slot)
        self.done = done
        info = {
            "breakdown": breakdown,
            "collision": collision,
            "capacity_violation": not capacity_ok,
            "gate_blocked": int(np.sum((power > 0) & (secrecy < cfg.secrecy_threshold_bps))),
            "bits_local": bits_loc,
            "bits_offloaded": bits_off,
            "user_energy_j": slot_energy,
            "slot_delay_s": slot_delay,
            "slot_energy_cost": w.w_energy * w.unit_cost_energy * float(slot_energy.sum()) / k,
            "slot_delay_cost": w.w_delay * w.unit_cost_delay * float(slot_delay.sum()) / k,
            "fly_energy_j": e_fly,
            "server_energy_j": e_server,
            "server_freq_hz": f_total,
            "power_w": power,
            "freq_hz": freq,
            "speed_mps": act.speed_mps,
            "energy_exhausted": self.ledger.exhausted,
            "finished": finished,
        }
        return StepOutcome(self.state.copy(), reward, done, info)

    def episode_cost(self) -> dict:
        """Cost of the episode so far, split into energy and delay parts."""
        w, k = self.config.weights, self.config.num_users
        e_c, t_c = float(self.user_energy_j.sum()), float(self.user_delay_s.sum())
        energy_part = w.w_energy * w.unit_cost_energy * e_c / k
        delay_part = w.w_delay * w.unit_cost_delay * t_c / k
        return {"average_cost": mec.episode_cost(e_c, t_c, w, k), "energy_cost": energy_part,
                "delay_cost": delay_part, "user_energy_j": e_c, "user_delay_s": t_c}
