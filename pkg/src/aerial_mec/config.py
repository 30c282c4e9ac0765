"""Nested key-value configuration (YAML) for scenarios and training.

Keys are the usual symbols of the system model (``V_S_max``, ``L_k``,
``R_min_sec`` ...).  A config file only needs the keys it overrides; every
other key keeps its default.  Dotted paths (``cost.omega_1``) or unique bare
symbols (``omega_1``) address single entries for overrides and sweeps.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

import yaml

from .channel import ChannelParams
from .ddpg import TrainConfig
from .env import DEFAULT_USERS, ConfigError, EnvConfig, NetworkLayout, RewardConsts
from .mec import ComputeParams, CostWeights, PropulsionParams

DEFAULTS = {
    "scenario": {
        "K": 5,
        "w_U": [list(u) for u in DEFAULT_USERS],
        "w_J": [300.0, 250.0],
        "q_S_I": [0.0, 250.0, 100.0],
        "q_E": [290.0, 150.0, 100.0],
        "r_E": 25.0,
        "d_min": 10.0,
        "arena": [500.0, 500.0],
        "mode": "noma",
    },
    "uav": {
        "V_S_max": 20.0,
        "Z_min": 100.0,
        "Z_max": 150.0,
        "E_S_budget": 20000.0,
        "P_0": 79.86,
        "P_i": 88.63,
        "U_tip": 120.0,
        "v_0": 4.03,
        "d_0": 0.6,
        "rho": 1.225,
        "s": 0.05,
        "A": 0.503,
    },
    "channel": {
        "B": 1.0e6,
        "f_c": 2.0e9,
        "sigma2_S_dBm": -100.0,
        "sigma2_E_dBm": -100.0,
        "eta_a": 12.08,
        "eta_b": 0.11,
        "eta_LoS": 1.6,
        "eta_NLoS": 23.0,
        "P_J": 0.1,
    },
    "users": {
        "P_k_max": 0.1,
        "F_k_max": 0.1e9,
        "L_k": 100.0e6,
        "C_k": 1000.0,
        "phi_k": 1e-28,
    },
    "server": {
        "F_S_max": 20.0e9,
        "C_S": 1000.0,
        "phi_S": 1e-28,
    },
    "system": {
        "delta_t": 0.5,
        "R_min_sec": 0.9e6,
        "max_slots": 400,
    },
    "cost": {
        "omega_1": 0.5,
        "c_E": 1.0,
        "c_T": 1.0,
    },
    "reward": {
        "kappa_f": 2.5e-7,
        "kappa_ac": 1.0,
        "kappa_rc": 10.0,
        "zeta": 1e-7,
    },
    "train": {
        "M_ep": 1000,
        "M_r": 10000,
        "M_b": 128,
        "lr_actor": 1e-4,
        "lr_critic": 6e-4,
        "tau": 1e-3,
        "beta": 0.99,
        "noise_initial": 0.2,
        "noise_floor": 0.02,
        "noise_floor_fraction": 0.8,
        "dtype": "float32",
        "seed": 0,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def resolve_key(key: str) -> tuple[str, str]:
    """Map ``section.name`` or a unique bare ``name`` to (section, name)."""
    if "." in key:
        section, name = key.split(".", 1)
        if section not in DEFAULTS or name not in DEFAULTS[section]:
            raise ConfigError(f"unknown config key {key!r}")
        return section, name
    hits = [s for s, entries in DEFAULTS.items() if key in entries]
    if not hits:
        raise ConfigError(f"unknown config key {key!r}")
    if len(hits) > 1:
        raise ConfigError(f"ambiguous config key {key!r}; use one of {[f'{h}.{key}' for h in hits]}")
    return hits[0], key


def _coerce(value, default, key):
    """Coerce to the type of the default (YAML reads ``1e6`` as a string)."""
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, str):
                value = float(value)
            if float(value) != int(value):
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if default and isinstance(default[0], list):
                return [[float(v) for v in row] for row in value]
            return [float(v) for v in value]
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for {key}") from exc


def set_key(config: dict, key: str, value) -> dict:
    section, name = resolve_key(key)
    config[section][name] = _coerce(value, DEFAULTS[section][name], f"{section}.{name}")
    return config


def merge(config: dict, overrides: dict) -> dict:
    for section, entries in overrides.items():
        if section not in DEFAULTS or not isinstance(entries, dict):
            raise ConfigError(f"unknown config section {section!r}")
        for name, value in entries.items():
            set_key(config, f"{section}.{name}", value)
    return config


def load_config(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return merge(default_config(), data)


def dump_config(config: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(config, sort_keys=True))


def parse_value(text: str):
    """Best-effort scalar parse for command-line values."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _dbm_to_w(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def build_env_config(config: dict, mode: str | None = None) -> EnvConfig:
    sc, uav, ch, us, sv, sy, co, rw = (config[s] for s in
                                      ("scenario", "uav", "channel", "users", "server", "system", "cost", "reward"))
    k = sc["K"]
    if k < 1 or k > len(sc["w_U"]):
        raise ConfigError(f"K={k} but {len(sc['w_U'])} user positions are configured")
    if len(sc["q_E"]) != 3 or len(sc["q_S_I"]) != 3 or len(sc["w_J"]) != 2:
        raise ConfigError("q_E and q_S_I need 3 coordinates, w_J needs 2")
    if not 0.0 <= co["omega_1"] <= 1.0:
        raise ConfigError("omega_1 must lie in [0, 1]")
    try:
        env = EnvConfig(
            layout=NetworkLayout(
                users=tuple(tuple(u) for u in sc["w_U"][:k]),
                jammer=tuple(sc["w_J"]),
                eve_center=tuple(sc["q_E"][:2]),
                eve_radius_m=sc["r_E"],
                eve_altitude_m=sc["q_E"][2],
                uav_start=tuple(sc["q_S_I"]),
            ),
            channel=ChannelParams(
                eta_a=ch["eta_a"], eta_b=ch["eta_b"], eta_los_db=ch["eta_LoS"], eta_nlos_db=ch["eta_NLoS"],
                carrier_hz=ch["f_c"], noise_power_s_w=_dbm_to_w(ch["sigma2_S_dBm"]),
                noise_power_e_w=_dbm_to_w(ch["sigma2_E_dBm"]),
            ),
            compute=ComputeParams(
                cycles_per_bit_user=us["C_k"], cycles_per_bit_server=sv["C_S"], cap_user=us["phi_k"],
                cap_server=sv["phi_S"], f_user_max_hz=us["F_k_max"], f_server_max_hz=sv["F_S_max"],
                slot_s=sy["delta_t"],
            ),
            propulsion=PropulsionParams(
                blade_profile_power_w=uav["P_0"], induced_power_w=uav["P_i"], tip_speed_mps=uav["U_tip"],
                hover_induced_speed_mps=uav["v_0"], fuselage_drag_ratio=uav["d_0"], air_density_kg_m3=uav["rho"],
                rotor_solidity=uav["s"], rotor_disc_area_m2=uav["A"],
            ),
            weights=CostWeights(w_energy=co["omega_1"], w_delay=1.0 - co["omega_1"],
                                unit_cost_energy=co["c_E"], unit_cost_delay=co["c_T"]),
            reward=RewardConsts(kappa_f=rw["kappa_f"], kappa_ac=rw["kappa_ac"], kappa_rc=rw["kappa_rc"],
                                zeta=rw["zeta"]),
            bandwidth_hz=ch["B"],
            jammer_power_w=ch["P_J"],
            v_max_mps=uav["V_S_max"],
            z_min_m=uav["Z_min"],
            z_max_m=uav["Z_max"],
            d_min_m=sc["d_min"],
            p_max_w=us["P_k_max"],
            secrecy_threshold_bps=sy["R_min_sec"],
            bits_per_user=us["L_k"],
            energy_budget_j=uav["E_S_budget"],
            max_slots=sy["max_slots"],
            arena=tuple(sc["arena"]),
            mode=mode or sc["mode"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    env.validate()
    return env


def build_train_config(config: dict, episodes: int | None = None, seed: int | None = None) -> TrainConfig:
    tr = config["train"]
    cfg = TrainConfig(
        episodes=episodes if episodes is not None else tr["M_ep"],
        batch=tr["M_b"],
        capacity=tr["M_r"],
        lr_actor=tr["lr_actor"],
        lr_critic=tr["lr_critic"],
        tau=tr["tau"],
        discount=tr["beta"],
        noise_initial=tr["noise_initial"],
        noise_floor=tr["noise_floor"],
        noise_floor_fraction=tr["noise_floor_fraction"],
        dtype=tr["dtype"],
        seed=seed if seed is not None else tr["seed"],
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def env_fingerprint(config: dict) -> str:
    """Hash of everything that defines the physical scenario (not the scheme or training)."""
    body = {k: v for k, v in config.items() if k != "train"}
    body = copy.deepcopy(body)
    body["scenario"].pop("mode", None)
    text = json.dumps(body, sort_keys=True, default=lambda o: o if math.isfinite(o) else str(o))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
