"""Computation, energy and cost bookkeeping for users and the UAV server."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ComputeParams:
    cycles_per_bit_user: float = 1000.0
    cycles_per_bit_server: float = 1000.0
    cap_user: float = 1e-28
    cap_server: float = 1e-28
    f_user_max_hz: float = 0.1e9
    f_server_max_hz: float = 20e9
    slot_s: float = 0.5

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PropulsionParams:
    """Rotary-wing propulsion constants (canonical values of the standard model)."""

    blade_profile_power_w: float = 79.86
    induced_power_w: float = 88.63
    tip_speed_mps: float = 120.0
    hover_induced_speed_mps: float = 4.03
    fuselage_drag_ratio: float = 0.6
    air_density_kg_m3: float = 1.225
    rotor_solidity: float = 0.05
    rotor_disc_area_m2: float = 0.503

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class EnergyLedger:
    budget_j: float = 20000.0
    spent_j: float = 0.0

    @property
    def residual_j(self) -> float:
        return self.budget_j - self.spent_j

    @property
    def exhausted(self) -> bool:
        return self.residual_j <= 0.0


@dataclass(frozen=True)
class CostWeights:
    w_energy: float = 0.5
    w_delay: float = 0.5
    unit_cost_energy: float = 1.0
    unit_cost_delay: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.w_energy <= 1.0 and 0.0 <= self.w_delay <= 1.0):
            raise ValueError("cost weights must lie in [0, 1]")
        if not math.isclose(self.w_energy + self.w_delay, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("cost weights must sum to 1")


@dataclass(frozen=True)
class UserTaskState:
    remaining_bits: float
    active_slots: int = 0

    def __post_init__(self):
        if self.remaining_bits < 0:
            raise ValueError("remaining bits must be non-negative")


def local_step(f_hz, params: ComputeParams):
    """Bits computed locally in one slot and the energy it costs (cubic DVFS law)."""
    f = np.asarray(f_hz, dtype=float)
    if np.any(f < 0) or np.any(f > params.f_user_max_hz * (1 + 1e-12)):
        raise ValueError(f"CPU frequency outside [0, {params.f_user_max_hz}] Hz")
    bits = params.slot_s * f / params.cycles_per_bit_user
    energy = params.slot_s * params.cap_user * f ** 3
    if f.ndim == 0:
        return float(bits), float(energy)
    return bits, energy


def offload_step(secrecy_rate_bps, p_w, params: ComputeParams, gate_threshold_bps: float,
                 airtime: float = 1.0):
    """Bits securely offloaded in one slot and the transmit energy spent.

    Bits only count when the secrecy rate clears the threshold; the radiated
    energy is charged either way.  ``airtime`` is the fraction of the slot the
    user is on the air (1/K under TDMA).
    """
    rate = np.asarray(secrecy_rate_bps, dtype=float)
    p = np.asarray(p_w, dtype=float)
    if np.any(p < 0):
        raise ValueError("transmit power must be non-negative")
    bits = np.where(rate >= gate_threshold_bps, params.slot_s * rate, 0.0)
    energy = params.slot_s * airtime * p
    if bits.ndim == 0:
        return float(bits), float(energy)
    return bits, energy


def server_load(bits_offloaded_per_user, params: ComputeParams):
    """Server CPU frequency/energy needed to process this slot's offloaded bits.

    Returns (per_user_freq_hz, total_freq_hz, energy_j, capacity_ok).
    """
    bits = np.atleast_1d(np.asarray(bits_offloaded_per_user, dtype=float))
    if np.any(bits < 0):
        raise ValueError("offloaded bits must be non-negative")
    f = bits * params.cycles_per_bit_server / params.slot_s
    total = float(f.sum())
    energy = float(np.sum(params.slot_s * params.cap_server * f ** 3))
    return f, total, energy, total <= params.f_server_max_hz


def propulsion_power(v_mps, params: PropulsionParams = PropulsionParams()):
    """Rotary-wing propulsion power (W) at horizontal speed v."""
    v = np.asarray(v_mps, dtype=float)
    if np.any(v < 0):
        raise ValueError("speed must be non-negative")
    v0 = params.hover_induced_speed_mps
    induced = params.induced_power_w * np.sqrt(np.sqrt(1.0 + v ** 4 / (4.0 * v0 ** 4)) - v ** 2 / (2.0 * v0 ** 2))
    parasite = 0.5 * params.fuselage_drag_ratio * params.air_density_kg_m3 * params.rotor_solidity \
        * params.rotor_disc_area_m2 * v ** 3
    profile = params.blade_profile_power_w * (1.0 + 3.0 * v ** 2 / params.tip_speed_mps ** 2)
    power = induced + parasite + profile
    return float(power) if power.ndim == 0 else power


def energy_update(ledger: EnergyLedger, fly_energy_j: float, compute_energy_j: float) -> EnergyLedger:
    if fly_energy_j < 0 or compute_energy_j < 0:
        raise ValueError("energies must be non-negative")
    return replace(ledger, spent_j=ledger.spent_j + fly_energy_j + compute_energy_j)


def data_update(task: UserTaskState, bits_local: float, bits_offloaded: float) -> UserTaskState:
    if bits_local < 0 or bits_offloaded < 0:
        raise ValueError("processed bits must be non-negative")
    active = task.active_slots + (1 if task.remaining_bits > 0 else 0)
    remaining = max(task.remaining_bits - bits_local - bits_offloaded, 0.0)
    return UserTaskState(remaining_bits=remaining, active_slots=active)


def episode_cost(total_user_energy_j: float, total_user_delay_s: float, weights: CostWeights,
                 num_users: int) -> float:
    """Average computation cost per user: weighted energy plus weighted delay."""
    return (weights.w_energy * weights.unit_cost_energy * total_user_energy_j
            + weights.w_delay * weights.unit_cost_delay * total_user_delay_s) / num_users


def local_only_cost(bits_per_user: float, params: ComputeParams, weights: CostWeights,
                    num_users: int) -> dict:
    """Closed-form cost when every user computes everything at peak frequency."""
    delay = bits_per_user * params.cycles_per_bit_user / params.f_user_max_hz
    energy = params.cap_user * params.f_user_max_hz ** 3 * delay
    e_c, t_c = num_users * energy, num_users * delay
    energy_part = weights.w_energy * weights.unit_cost_energy * e_c / num_users
    delay_part = weights.w_delay * weights.unit_cost_delay * t_c / num_users
    return {
        "delay_per_user_s": delay,
        "energy_per_user_j": energy,
        "average_cost": energy_part + delay_part,
        "energy_cost": energy_part,
        "delay_cost": delay_part,
    }
