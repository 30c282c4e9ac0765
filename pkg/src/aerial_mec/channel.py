"""Air-ground propagation for the aerial MEC network.

Probabilistic LoS model: the LoS probability depends on the elevation angle
(in degrees) between a ground node and an aerial node, and the average path
loss blends free-space loss with LoS/NLoS excess losses.  Worst-case links
towards the location-uncertain eavesdropper are obtained by evaluating the
same pipeline at triangle-inequality distance bounds over its disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ColocatedNodesError(ValueError):
    """Raised when a link has zero length, so elevation and loss are undefined."""


@dataclass(frozen=True)
class ChannelParams:
    eta_a: float = 12.08
    eta_b: float = 0.11
    eta_los_db: float = 1.6
    eta_nlos_db: float = 23.0
    carrier_hz: float = 2e9
    noise_power_s_w: float = 1e-13  # -100 dBm
    noise_power_e_w: float = 1e-13

    def __post_init__(self):
        if self.eta_a <= 0 or self.eta_b <= 0:
            raise ValueError("eta_a and eta_b must be positive")
        if self.carrier_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.noise_power_s_w <= 0 or self.noise_power_e_w <= 0:
            raise ValueError("noise powers must be positive")
        if self.eta_nlos_db < self.eta_los_db:
            raise ValueError("NLoS excess loss must not be below the LoS excess loss")


@dataclass(frozen=True)
class GroundPosition:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("ground coordinates must be finite")


@dataclass(frozen=True)
class AirPosition:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("altitude must be positive")


@dataclass(frozen=True)
class EavesdropperRegion:
    """Disk of possible horizontal eavesdropper positions at a fixed altitude."""

    center: GroundPosition
    radius_m: float
    altitude_m: float

    def __post_init__(self):
        if self.radius_m < 0:
            raise ValueError("uncertainty radius must be non-negative")
        if self.altitude_m <= 0:
            raise ValueError("eavesdropper altitude must be positive")


def _distance(ground: GroundPosition, air: AirPosition) -> float:
    d = math.sqrt((air.x - ground.x) ** 2 + (air.y - ground.y) ** 2 + air.z ** 2)
    if d == 0.0:
        raise ColocatedNodesError("ground and air node are co-located")
    return d


def free_space_loss_db(distance_m, p: ChannelParams):
    """20 log10(d) + 20 log10(4 pi f_c / c); accepts scalars or arrays."""
    return 20.0 * np.log10(distance_m) + 20.0 * math.log10(4.0 * math.pi * p.carrier_hz / SPEED_OF_LIGHT)


def los_probability_from_geometry(height_m, distance_m, p: ChannelParams):
    """LoS probability for a link of given height difference and 3D length.

    Vectorised core shared by every link in the simulator.  The elevation
    angle is taken in degrees, which is what the (eta_a, eta_b) fit expects.
    """
    elevation_deg = np.degrees(np.arcsin(np.clip(np.divide(height_m, distance_m), -1.0, 1.0)))
    return 1.0 / (1.0 + p.eta_a * np.exp(-p.eta_b * (elevation_deg - p.eta_a)))


def path_loss_from_geometry(height_m, distance_m, p: ChannelParams):
    """Average path loss in dB for links of given height and 3D length."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ColocatedNodesError("zero-length link")
    p_los = los_probability_from_geometry(height_m, distance_m, p)
    fs = free_space_loss_db(distance_m, p)
    loss = p_los * (fs + p.eta_los_db) + (1.0 - p_los) * (fs + p.eta_nlos_db)
    return loss if loss.ndim else float(loss)


def los_probability(ground: GroundPosition, air: AirPosition, p: ChannelParams) -> float:
    d = _distance(ground, air)
    return float(los_probability_from_geometry(air.z, d, p))


def average_path_loss_db(ground: GroundPosition, air: AirPosition, p: ChannelParams) -> float:
    d = _distance(ground, air)
    return float(path_loss_from_geometry(air.z, d, p))


def channel_gain(loss_db):
    """Linear power gain 10^(-L/10)."""
    gain = np.power(10.0, -np.asarray(loss_db, dtype=float) / 10.0)
    return gain if gain.ndim else float(gain)


def worst_case_distance_bounds(node: GroundPosition, region: EavesdropperRegion, role: str) -> float:
    """Distance bound between a ground node and the eavesdropper disk.

    ``role="user"`` gives the lower bound used for the eavesdropped user's own
    signal (strongest possible interception); ``role="interferer"`` gives the
    upper bound used for jammer and co-channel users (weakest possible
    interference).  The horizontal gap is floored at zero so the lower bound
    stays valid when the node lies inside the disk.
    """
    horizontal = math.hypot(node.x - region.center.x, node.y - region.center.y)
    if role == "user":
        gap = max(horizontal - region.radius_m, 0.0)
    elif role in ("interferer", "jammer"):
        gap = horizontal + region.radius_m
    else:
        raise ValueError(f"unknown role {role!r}")
    return math.sqrt(region.altitude_m ** 2 + gap ** 2)


def gain_at_distance(distance_m, height_m, p: ChannelParams):
    """Average-loss channel gain of a link with the given length and height."""
    return channel_gain(path_loss_from_geometry(height_m, distance_m, p))
