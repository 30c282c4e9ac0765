"""NOMA uplink rates with SIC, worst-case eavesdropping and secrecy rates.

Users are indexed 0..K-1.  Path-loss ties are broken by index: the lower
index is treated as the stronger link, so exactly one user of every pair is
decoded first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LinkSnapshot:
    """Per-slot link state seen by the rate computations.

    Attributes
    ----------
    gain_to_server : (K,) linear gains user -> UAV server.
    worst_gain_to_eve : (K,) upper-bound gains user -> eavesdropper.
    worst_interferer_gain_to_eve : (K,) lower-bound gains user -> eavesdropper,
        used when the user acts as co-channel interference at the eavesdropper.
    jammer_gain_to_eve_lb : lower-bound gain jammer -> eavesdropper.
    loss_to_server_db : (K,) path losses used for the SIC order at the server.
    loss_to_eve_db : (K,) ordering metric at the eavesdropper.
    noise_server_w, noise_eve_w : AWGN powers.
    """

    gain_to_server: np.ndarray
    worst_gain_to_eve: np.ndarray
    worst_interferer_gain_to_eve: np.ndarray
    jammer_gain_to_eve_lb: float
    loss_to_server_db: np.ndarray
    loss_to_eve_db: np.ndarray
    noise_server_w: float = 1e-13
    noise_eve_w: float = 1e-13

    def __post_init__(self):
        for name in ("gain_to_server", "worst_gain_to_eve", "worst_interferer_gain_to_eve",
                     "loss_to_server_db", "loss_to_eve_db"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if self.noise_server_w <= 0 or self.noise_eve_w <= 0:
            raise ValueError("noise powers must be positive")

    @property
    def num_users(self) -> int:
        return self.gain_to_server.shape[0]


@dataclass
class PowerAllocation:
    user_tx_w: np.ndarray
    jammer_tx_w: float = 0.1

    def __post_init__(self):
        self.user_tx_w = np.atleast_1d(np.asarray(self.user_tx_w, dtype=float))
        if np.any(self.user_tx_w < 0) or self.jammer_tx_w < 0:
            raise ValueError("transmit powers must be non-negative")


def sic_indicator(loss_k_db: float, loss_l_db: float, k: int = 0, l: int = 1) -> int:
    """1 if user k's link is stronger than user l's (k decoded before l)."""
    if loss_k_db < loss_l_db:
        return 1
    if loss_k_db > loss_l_db:
        return 0
    return 1 if k < l else 0


def stronger_matrix(loss_db: np.ndarray) -> np.ndarray:
    """Matrix M with M[k, l] = sic_indicator(loss[k], loss[l], k, l), zero diagonal."""
    loss = np.asarray(loss_db, dtype=float)
    idx = np.arange(loss.shape[0])
    m = (loss[:, None] < loss[None, :]) | ((loss[:, None] == loss[None, :]) & (idx[:, None] < idx[None, :]))
    return m.astype(float)


def _server_sinr_all(links: LinkSnapshot, p: np.ndarray) -> np.ndarray:
    lam = stronger_matrix(links.loss_to_server_db)
    rx = links.gain_to_server * p
    return rx / (lam @ rx + links.noise_server_w)


def _eve_sinr_ub_all(links: LinkSnapshot, powers: PowerAllocation) -> np.ndarray:
    p = powers.user_tx_w
    # users weaker than k at the eavesdropper still interfere when k is intercepted
    weaker = stronger_matrix(links.loss_to_eve_db)
    interference = weaker @ (links.worst_interferer_gain_to_eve * p)
    denom = links.jammer_gain_to_eve_lb * powers.jammer_tx_w + interference + links.noise_eve_w
    return links.worst_gain_to_eve * p / denom


def server_sinr(k: int, links: LinkSnapshot, powers: PowerAllocation) -> float:
    return float(_server_sinr_all(links, powers.user_tx_w)[k])


def server_rate(k: int, links: LinkSnapshot, powers: PowerAllocation, bandwidth_hz: float) -> float:
    return float(bandwidth_hz * np.log2(1.0 + server_sinr(k, links, powers)))


def eavesdropper_rate_upper_bound(k: int, links: LinkSnapshot, powers: PowerAllocation,
                                  bandwidth_hz: float) -> float:
    return float(bandwidth_hz * np.log2(1.0 + _eve_sinr_ub_all(links, powers)[k]))


def secrecy_rate(k: int, links: LinkSnapshot, powers: PowerAllocation, bandwidth_hz: float) -> float:
    return float(noma_secrecy_rates(links, powers, bandwidth_hz)[k])


def noma_secrecy_rates(links: LinkSnapshot, powers: PowerAllocation, bandwidth_hz: float) -> np.ndarray:
    """Worst-case secrecy rates of all users at once (bits/s)."""
    r_s = bandwidth_hz * np.log2(1.0 + _server_sinr_all(links, powers.user_tx_w))
    r_e = bandwidth_hz * np.log2(1.0 + _eve_sinr_ub_all(links, powers))
    return np.maximum(r_s - r_e, 0.0)


def tdma_secrecy_rates(links: LinkSnapshot, powers: PowerAllocation, bandwidth_hz: float,
                       num_users: int | None = None) -> np.ndarray:
    """Benchmark rates when the slot is split equally among the users.

    Each user is alone on the channel during its share, so neither the server
    nor the eavesdropper sees co-channel interference; the jammer still hits
    the eavesdropper.
    """
    k_total = links.num_users if num_users is None else num_users
    if k_total < 1:
        raise ValueError("num_users must be at least 1")
    p = powers.user_tx_w
    snr_s = links.gain_to_server * p / links.noise_server_w
    snr_e = links.worst_gain_to_eve * p / (links.jammer_gain_to_eve_lb * powers.jammer_tx_w + links.noise_eve_w)
    rate = (bandwidth_hz / k_total) * (np.log2(1.0 + snr_s) - np.log2(1.0 + snr_e))
    return np.maximum(rate, 0.0)


def tdma_secrecy_rate(k: int, links: LinkSnapshot, powers: PowerAllocation, bandwidth_hz: float,
                      num_users: int) -> float:
    return float(tdma_secrecy_rates(links, powers, bandwidth_hz, num_users)[k])
