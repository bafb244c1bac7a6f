from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

THERMAL_NOISE_DBM_PER_HZ = -174.0
DEFAULT_NOISE_FIGURE_DB = 10.0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        return float("-inf")
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def watts_to_dbm(value_w: float) -> float:
    if value_w <= 0:
        return float("-inf")
    return 10.0 * math.log10(value_w) + 30.0


def pathloss_constant(frequency: float) -> float:
    """Free-space reference gain (lambda / 4 pi)^2 at 1 m."""
    if not frequency > 0:
        raise ValueError("frequency must be > 0")
    wavelength = SPEED_OF_LIGHT / frequency
    return (wavelength / (4.0 * math.pi)) ** 2


def path_loss(d: float | np.ndarray, alpha: float, C: float) -> float | np.ndarray:
    arr = np.asarray(d, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("path loss distance must be > 0")
    value = C * arr ** (-alpha)
    if np.ndim(value) == 0:
        return float(value)
    return value


def noise_power(bandwidth: float, noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    return dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth) + noise_figure_db)


@dataclass(frozen=True)
class BandParams:
    carrier_frequency: float
    bandwidth: float
    pathloss_exponent_los: float
    pathloss_exponent_nlos: float
    noise_power: float

    def __post_init__(self) -> None:
        if not (self.carrier_frequency > 0 and self.bandwidth > 0):
            raise ValueError("carrier frequency and bandwidth must be > 0")
        if self.pathloss_exponent_los < 2 or self.pathloss_exponent_nlos < 2:
            raise ValueError("path-loss exponents must be >= 2")
        if not self.noise_power > 0:
            raise ValueError("noise power must be > 0")

    @classmethod
    def with_thermal_noise(
        cls,
        carrier_frequency: float,
        bandwidth: float,
        pathloss_exponent_los: float,
        pathloss_exponent_nlos: float | None = None,
        noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB,
    ) -> "BandParams":
        return cls(
            carrier_frequency=carrier_frequency,
            bandwidth=bandwidth,
            pathloss_exponent_los=pathloss_exponent_los,
            pathloss_exponent_nlos=(
                pathloss_exponent_los if pathloss_exponent_nlos is None else pathloss_exponent_nlos
            ),
            noise_power=noise_power(bandwidth, noise_figure_db),
        )

    @property
    def pathloss_constant(self) -> float:
        return pathloss_constant(self.carrier_frequency)


@dataclass(frozen=True)
class AntennaPattern:
    mainlobe_gain: float
    sidelobe_gain: float
    beamwidth: float

    def __post_init__(self) -> None:
        if not (self.mainlobe_gain > self.sidelobe_gain > 0):
            raise ValueError("antenna gains must satisfy mainlobe > sidelobe > 0")
        if not (0 < self.beamwidth <= 2.0 * math.pi):
            raise ValueError("beamwidth must lie in (0, 2*pi]")

    @classmethod
    def from_dbi(cls, mainlobe_dbi: float, sidelobe_dbi: float, beamwidth_deg: float) -> "AntennaPattern":
        return cls(db_to_linear(mainlobe_dbi), db_to_linear(sidelobe_dbi), math.radians(beamwidth_deg))

    @property
    def coverage_probability(self) -> float:
        return self.beamwidth / (2.0 * math.pi)


@dataclass(frozen=True)
class GainDistribution:
    gains: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.gains) != len(self.probabilities) or not self.gains:
            raise ValueError("gains and probabilities must be non-empty and of equal length")
        if any(p < 0 for p in self.probabilities) or abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ValueError("probabilities must be >= 0 and sum to 1")
        if any(g <= 0 for g in self.gains):
            raise ValueError("gains must be > 0")
        if any(self.gains[i] < self.gains[i + 1] for i in range(len(self.gains) - 1)):
            raise ValueError("gains must be non-increasing")

    @property
    def mean_gain(self) -> float:
        return math.fsum(g * p for g, p in zip(self.gains, self.probabilities))


def gain_distribution(pattern: AntennaPattern) -> GainDistribution:
    p = pattern.coverage_probability
    g_m = pattern.mainlobe_gain
    g_s = pattern.sidelobe_gain
    return GainDistribution(
        gains=(g_m * g_m, g_m * g_s, g_s * g_s),
        probabilities=(p * p, 2.0 * p * (1.0 - p), (1.0 - p) ** 2),
    )


def mainlobe_covers(bearing: np.ndarray | float, boresight: np.ndarray | float, beamwidth: float) -> np.ndarray:
    """True where `bearing` falls inside the mainlobe centred on `boresight`."""
    diff = np.angle(np.exp(1j * (np.asarray(bearing) - np.asarray(boresight))))
    return np.abs(diff) <= 0.5 * beamwidth


def sample_rayleigh_gain(rng: np.random.Generator, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
    """Power gain of a Rayleigh-faded link: Exp(1)."""
    return rng.exponential(1.0, size=size)
