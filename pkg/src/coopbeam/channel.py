"""Propagation model: free-space link budget and Rician fading draws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import SPEED_OF_LIGHT


def db2pow(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def pow2db(p):
    return 10.0 * np.log10(p)


@dataclass(frozen=True)
class RicianFactor:
    """Ratio of line-of-sight power to scattered power."""

    k_db: float

    def __post_init__(self):
        if math.isnan(self.k_db):
            raise ValueError("k_db must not be NaN")

    @property
    def linear(self) -> float:
        return float(10.0 ** (self.k_db / 10.0))


@dataclass(frozen=True)
class LinkBudget:
    """mmWave link budget. Defaults are the 73.5 GHz design point."""

    freq_ghz: float = 73.5
    bandwidth_ghz: float = 5.0
    tx_power_dbm: float = 14.6
    other_losses_db: float = 12.7
    rx_gain_dbi: float = 27.0
    rx_noise_figure_db: float = 7.0
    rx_noise_dbm: float = -76.8
    modulation: str = "64qam"

    def __post_init__(self):
        if not (self.freq_ghz > 0 and self.bandwidth_ghz > 0):
            raise ValueError("freq_ghz and bandwidth_ghz must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (self.freq_ghz * 1e9)

    @property
    def noise_dbm(self) -> float:
        # receiver noise floor including the noise figure
        return self.rx_noise_dbm + self.rx_noise_figure_db


class ReceivedPower(NamedTuple):
    pr_dbm: float
    noise_dbm: float


def path_loss_db(distance_m: float, freq_ghz: float) -> float:
    """Free-space path loss, 32.4 + 20 log10(d_m) + 20 log10(f_GHz)."""
    if not (distance_m > 0 and math.isfinite(distance_m)):
        raise ValueError("distance_m must be positive and finite")
    if not (freq_ghz > 0 and math.isfinite(freq_ghz)):
        raise ValueError("freq_ghz must be positive and finite")
    return 32.4 + 20.0 * math.log10(distance_m) + 20.0 * math.log10(freq_ghz)


def received_power(budget: LinkBudget, num_elements: int, distance_m: float) -> ReceivedPower:
    """Received power and noise floor for a transmit array of num_elements.

    The transmit array gain is 10 log10(num_elements); beamforming gains
    beyond that are carried by the channel/precoder inner products.
    """
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    pr = (
        budget.tx_power_dbm
        + 10.0 * math.log10(num_elements)
        + budget.rx_gain_dbi
        - path_loss_db(distance_m, budget.freq_ghz)
        - budget.other_losses_db
    )
    return ReceivedPower(pr, budget.noise_dbm)


def rician_sample(los, k, rng: np.random.Generator) -> np.ndarray:
    """One Rician fading draw around a line-of-sight response.

    h = sqrt(K/(K+1)) los + sqrt(1/(K+1)) g with g entries CN(0, 1).
    `k` is a RicianFactor or a linear K value; K = inf returns the LOS
    response exactly.
    """
    kl = k.linear if isinstance(k, RicianFactor) else float(k)
    if kl < 0 or math.isnan(kl):
        raise ValueError("Rician K must be nonnegative")
    los = np.asarray(los, dtype=complex)
    if math.isinf(kl):
        return los.copy()
    scatter = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / math.sqrt(2.0)
    return math.sqrt(kl / (kl + 1.0)) * los + math.sqrt(1.0 / (kl + 1.0)) * scatter


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-array channel vectors for one user; the combined link is the sum."""

    h_left: np.ndarray
    h_right: np.ndarray

    def __post_init__(self):
        h_left = np.asarray(self.h_left, dtype=complex)
        h_right = np.asarray(self.h_right, dtype=complex)
        if h_left.shape != h_right.shape or h_left.ndim != 1:
            raise ValueError("h_left and h_right must be 1-d and the same length")
        object.__setattr__(self, "h_left", h_left)
        object.__setattr__(self, "h_right", h_right)

    @property
    def h_combined(self) -> np.ndarray:
        return self.h_left + self.h_right


def combined_channel(h_left, h_right) -> ChannelRealization:
    return ChannelRealization(h_left, h_right)
