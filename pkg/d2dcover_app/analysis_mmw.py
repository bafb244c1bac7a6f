from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import los_probability
from .laplace import DEFAULT_RTOL, LaplaceEvaluation, laplace_from_exponent, pgfl_exponent
from .propagation import AntennaPattern, BandParams, GainDistribution, gain_distribution


@dataclass(frozen=True)
class MmwScenario:
    """Test link and interferer field in the mmW band (powers in W, densities per m^2)."""

    tx_power: float
    pattern: AntennaPattern
    band: BandParams
    dt_density: float
    access_probability: float
    beta: float
    distance: float
    threshold: float

    def __post_init__(self) -> None:
        if not self.tx_power > 0:
            raise ValueError("tx_power must be > 0")
        if self.dt_density < 0:
            raise ValueError("dt_density must be >= 0")
        if not 0.0 <= self.access_probability <= 1.0:
            raise ValueError("access_probability must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.distance > 0:
            raise ValueError("distance must be > 0")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")

    @property
    def gains(self) -> GainDistribution:
        return gain_distribution(self.pattern)

    @property
    def pathloss_constant(self) -> float:
        return self.band.pathloss_constant

    @property
    def epsilon(self) -> float:
        g_m = self.pattern.mainlobe_gain
        alpha = self.band.pathloss_exponent_los
        return self.threshold * self.distance**alpha / (self.tx_power * g_m * g_m * self.pathloss_constant)

    @property
    def thinned_densities(self) -> tuple[float, ...]:
        return tuple(self.access_probability * p * self.dt_density for p in self.gains.probabilities)

    def with_threshold(self, threshold: float) -> "MmwScenario":
        return replace(self, threshold=threshold)

    def with_distance(self, distance: float) -> "MmwScenario":
        return replace(self, distance=distance)


def laplace_mmw_interference(
    scenario: MmwScenario,
    s: float,
    gains: GainDistribution | None = None,
    rtol: float = DEFAULT_RTOL,
) -> LaplaceEvaluation:
    """Laplace transform of the LOS mmW interference at the origin, by quadrature.

    `gains` replaces the sectored gain distribution, e.g. a single lumped class
    for bracketing checks.
    """
    if s < 0:
        raise ValueError("transform argument must be >= 0")
    dist = gains or scenario.gains
    if s == 0 or scenario.dt_density == 0 or scenario.access_probability == 0:
        return LaplaceEvaluation(value=1.0, method="quadrature", abs_error=0.0, detail="no interference")
    base = s * scenario.tx_power * scenario.pathloss_constant
    exponent = 0.0
    exponent_err = 0.0
    for gain, prob in zip(dist.gains, dist.probabilities):
        density = scenario.access_probability * prob * scenario.dt_density
        value, err = pgfl_exponent(
            base * gain,
            scenario.band.pathloss_exponent_los,
            density,
            beta=scenario.beta,
            rtol=rtol,
        )
        exponent += value
        exponent_err += err
    return laplace_from_exponent(exponent, exponent_err, detail=f"{len(dist.gains)} gain classes")


def coverage_mmw(scenario: MmwScenario, conditional_on_los: bool = True) -> float:
    """SINR coverage in the mmW band; the unconditional form includes p_LOS(d0)."""
    eps = scenario.epsilon
    noise_term = math.exp(-eps * scenario.band.noise_power)
    value = noise_term * laplace_mmw_interference(scenario, eps).value
    if not conditional_on_los:
        value *= los_probability(scenario.distance, scenario.beta)
    return min(1.0, max(0.0, value))
