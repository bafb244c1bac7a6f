from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma

from .geometry import RngLike, as_generator
from .laplace import DEFAULT_RTOL, LaplaceEvaluation, laplace_from_exponent, pgfl_exponent
from .propagation import BandParams

UW_LAPLACE_METHODS = ("quadrature", "literal", "standard")
DEFAULT_PKD_CELLS = 20_000


class ClosedFormUnavailableError(ValueError):
    pass


@dataclass(frozen=True)
class UwScenario:
    """Test link, D2D interferers and the cellular downlink on the shared channel k_d."""

    dt_power: float
    bs_power: float
    band: BandParams
    dt_density: float
    bs_density: float
    cu_density: float
    channel_count: int
    sensing_threshold: float
    distance: float
    threshold: float
    pkd: float | None = None
    include_pathloss_in_threshold: bool = False

    def __post_init__(self) -> None:
        if not (self.dt_power > 0 and self.bs_power > 0):
            raise ValueError("transmit powers must be > 0")
        if min(self.dt_density, self.bs_density, self.cu_density) < 0:
            raise ValueError("densities must be >= 0")
        if self.channel_count < 1:
            raise ValueError("channel_count must be >= 1")
        if not self.sensing_threshold > 0:
            raise ValueError("sensing_threshold must be > 0")
        if not self.distance > 0:
            raise ValueError("distance must be > 0")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.pkd is not None and not 0.0 <= self.pkd <= 1.0:
            raise ValueError("pkd must lie in [0, 1]")

    @property
    def alpha(self) -> float:
        return self.band.pathloss_exponent_los

    @property
    def delta(self) -> float:
        return 1.0 / self.alpha

    @property
    def pathloss_constant(self) -> float:
        return self.band.pathloss_constant

    @property
    def epsilon(self) -> float:
        return self.threshold * self.distance**self.alpha / (self.pathloss_constant * self.dt_power)

    @property
    def eps_dt(self) -> float:
        return self.pathloss_constant * self.dt_power * self.epsilon

    @property
    def eps_b(self) -> float:
        return self.pathloss_constant * self.bs_power * self.epsilon

    @property
    def mean_snr(self) -> float:
        """Test link SNR with unit fading and no interference."""
        return self.pathloss_constant * self.dt_power * self.distance ** (-self.alpha) / self.band.noise_power

    @property
    def threshold_radius(self) -> float:
        constant = self.pathloss_constant if self.include_pathloss_in_threshold else 1.0
        return mean_threshold_radius(self.bs_power, self.sensing_threshold, self.alpha, constant)

    def require_pkd(self) -> float:
        if self.pkd is None:
            raise ValueError("pkd is unresolved; call resolve_pkd first")
        return self.pkd

    @property
    def availability(self) -> float:
        return availability(self.bs_density, self.require_pkd(), self.threshold_radius)

    def with_threshold(self, threshold: float) -> "UwScenario":
        return replace(self, threshold=threshold)

    def with_distance(self, distance: float) -> "UwScenario":
        return replace(self, distance=distance)


def estimate_pkd(
    bs_density: float,
    cu_density: float,
    channel_count: int,
    rng: RngLike,
    n_cells: int = DEFAULT_PKD_CELLS,
) -> float:
    """Monte Carlo P[N >= K] for the user load N of a typical Voronoi cell.

    Only the density ratio matters, so BSs are drawn at unit density on a periodic
    square holding `n_cells` cells; the torus removes edge effects.
    """
    if not bs_density > 0:
        raise ValueError("bs_density must be > 0")
    if cu_density < 0:
        raise ValueError("cu_density must be >= 0")
    if channel_count < 1:
        raise ValueError("channel_count must be >= 1")
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if cu_density == 0:
        return 0.0
    gen = as_generator(rng)
    side = math.sqrt(n_cells)
    bss = gen.uniform(0.0, side, size=(n_cells, 2))
    users = gen.uniform(0.0, side, size=(int(gen.poisson(cu_density / bs_density * n_cells)), 2))
    if users.shape[0] == 0:
        return 0.0
    tree = cKDTree(bss, boxsize=side)
    _, nearest = tree.query(users)
    load = np.bincount(nearest, minlength=n_cells)
    return float(np.mean(load >= channel_count))


def resolve_pkd(scenario: UwScenario, rng: RngLike, n_cells: int = DEFAULT_PKD_CELLS) -> UwScenario:
    if scenario.pkd is not None:
        return scenario
    pkd = estimate_pkd(scenario.bs_density, scenario.cu_density, scenario.channel_count, rng, n_cells)
    return replace(scenario, pkd=pkd)


def mean_threshold_radius(bs_power: float, tau: float, alpha: float, pathloss_constant: float = 1.0) -> float:
    if not tau > 0:
        raise ValueError("sensing threshold must be > 0")
    if not (bs_power > 0 and alpha > 0 and pathloss_constant > 0):
        raise ValueError("bs_power, alpha and pathloss_constant must be > 0")
    delta = 1.0 / alpha
    return (pathloss_constant * bs_power / tau) ** delta * float(gamma(1.0 + delta))


def availability(bs_density: float, pkd: float, radius: float) -> float:
    if min(bs_density, pkd, radius) < 0:
        raise ValueError("availability inputs must be >= 0")
    return math.exp(-bs_density * pkd * math.pi * radius * radius)


def laplace_uw_dt(
    scenario: UwScenario,
    p_a: float,
    method: str = "quadrature",
    exponent: str = "literal",
    rtol: float = DEFAULT_RTOL,
) -> LaplaceEvaluation:
    """Laplace transform of the D2D interference at s = epsilon.

    The closed form's `exponent="literal"` keeps the power delta on eps_DT as first derived;
    `"standard"` uses 2*delta, the usual planar shot-noise result.
    """
    if not 0.0 <= p_a <= 1.0:
        raise ValueError("p_a must lie in [0, 1]")
    eps_dt = scenario.eps_dt
    density = p_a * scenario.dt_density
    if eps_dt == 0 or density == 0:
        return LaplaceEvaluation(value=1.0, method="closed_form" if method == "closed_form" else "quadrature")
    if method == "closed_form":
        delta = scenario.delta
        sine = math.sin(2.0 * math.pi * delta)
        if abs(sine) < 1e-12:
            raise ClosedFormUnavailableError(
                f"closed form undefined for alpha={scenario.alpha:g}; use method='quadrature'"
            )
        if exponent not in ("literal", "standard"):
            raise ValueError(f"unknown exponent variant {exponent!r}")
        power = delta if exponent == "literal" else 2.0 * delta
        value = math.exp(-2.0 * density * eps_dt**power * math.pi**2 * delta / sine)
        return LaplaceEvaluation(value=value, method="closed_form", detail=f"exponent={exponent}")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    log_value, err = pgfl_exponent(eps_dt, scenario.alpha, density, beta=0.0, rtol=rtol)
    return laplace_from_exponent(log_value, err, detail="PGFL over the plane")


def laplace_uw_bs(
    scenario: UwScenario,
    pkd: float,
    radius: float,
    method: str = "quadrature",
    form: str = "literal",
    rtol: float = DEFAULT_RTOL,
) -> LaplaceEvaluation:
    """Laplace transform of the BS interference from k_d users outside the threshold region."""
    if not 0.0 <= pkd <= 1.0:
        raise ValueError("pkd must lie in [0, 1]")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    eps_b = scenario.eps_b
    density = pkd * scenario.bs_density
    if eps_b == 0 or density == 0:
        return LaplaceEvaluation(value=1.0, method="closed_form" if method == "closed_form" else "quadrature")
    if method == "closed_form":
        if scenario.alpha != 4:
            raise ClosedFormUnavailableError(
                f"closed form requires alpha=4 (got {scenario.alpha:g}); use method='quadrature'"
            )
        if form not in ("literal", "standard"):
            raise ValueError(f"unknown closed-form variant {form!r}")
        root = math.sqrt(eps_b)
        vartheta = math.inf if radius == 0 else math.sqrt(eps_b * radius ** (-scenario.alpha))
        arc = math.pi / 2.0 - math.atan2(1.0, vartheta)
        exponent_value = -math.pi * density * root * arc
        if form == "literal":
            bump = 0.0 if math.isinf(vartheta) else vartheta / (vartheta * vartheta + 1.0)
            exponent_value += -math.pi * density * root * bump
            exponent_value += density * math.pi * eps_b * radius**2 / (eps_b + radius**scenario.alpha)
        return LaplaceEvaluation(value=math.exp(exponent_value), method="closed_form", detail=f"form={form}")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    log_value, err = pgfl_exponent(eps_b, scenario.alpha, density, beta=0.0, r_min=radius, rtol=rtol)
    return laplace_from_exponent(log_value, err, detail="PGFL outside the threshold region")


def coverage_uw(scenario: UwScenario, method: str = "quadrature") -> float:
    """SINR coverage on k_d, conditioned on the test pair having access.

    `method` picks the Laplace transforms: "quadrature", "literal" (closed
    forms) or "standard" (corrected closed forms).
    """
    if method not in UW_LAPLACE_METHODS:
        raise ValueError(f"unknown method {method!r}")
    pkd = scenario.require_pkd()
    radius = scenario.threshold_radius
    p_a = availability(scenario.bs_density, pkd, radius)
    eps = scenario.epsilon
    noise_term = math.exp(-eps * scenario.band.noise_power)
    if method == "quadrature":
        l_dt = laplace_uw_dt(scenario, p_a, method="quadrature")
        l_bs = laplace_uw_bs(scenario, pkd, radius, method="quadrature")
    else:
        l_dt = laplace_uw_dt(scenario, p_a, method="closed_form", exponent=method)
        l_bs = laplace_uw_bs(scenario, pkd, radius, method="closed_form", form=method)
    return min(1.0, max(0.0, noise_term * l_dt.value * l_bs.value))
