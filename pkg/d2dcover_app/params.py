from __future__ import annotations

from dataclasses import dataclass, field, replace

from .aoa_mechanism import MechanismParams
from .analysis_mmw import MmwScenario
from .analysis_uw import UW_LAPLACE_METHODS, UwScenario, resolve_pkd
from .geometry import BlockageProcess, RngLike
from .propagation import AntennaPattern, BandParams, dbm_to_watts

DEFAULT_BLOCKAGE_SIZE_RANGE_M = (20.0, 84.2)


@dataclass(frozen=True)
class SystemParams:
    """Every physical parameter of the hybrid D2D network, in SI units."""

    dt_power: float = dbm_to_watts(0.0)
    bs_power: float = dbm_to_watts(37.0)
    pattern: AntennaPattern = field(default_factory=lambda: AntennaPattern.from_dbi(10.0, -10.0, 30.0))
    mmw_band: BandParams = field(default_factory=lambda: BandParams.with_thermal_noise(28e9, 1e9, 2.0, 5.0))
    uw_band: BandParams = field(default_factory=lambda: BandParams.with_thermal_noise(2e9, 1e8, 4.0))
    dt_density: float = 50e-6
    bs_density: float = 1e-6
    cu_density: float = 5e-6
    beta: float = 0.0053
    blockage_length_range: tuple[float, float] = DEFAULT_BLOCKAGE_SIZE_RANGE_M
    blockage_width_range: tuple[float, float] = DEFAULT_BLOCKAGE_SIZE_RANGE_M
    access_probability: float = 1.0
    sensing_threshold: float = dbm_to_watts(-85.0)
    channel_count: int = 8
    pkd: float | None = None
    include_pathloss_in_threshold: bool = False
    distance: float = 50.0
    mechanism: MechanismParams = field(default_factory=MechanismParams)
    uw_laplace_method: str = "quadrature"
    rate_log_base: float = 2.0

    def __post_init__(self) -> None:
        if self.uw_laplace_method not in UW_LAPLACE_METHODS:
            raise ValueError(f"uw_laplace_method must be one of {', '.join(UW_LAPLACE_METHODS)}")
        if not self.rate_log_base > 1:
            raise ValueError("rate_log_base must be > 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    @property
    def blockage_process(self) -> BlockageProcess:
        return BlockageProcess.for_beta(self.beta, self.blockage_length_range, self.blockage_width_range)

    @property
    def mechanism_params(self) -> MechanismParams:
        """Mechanism knobs bound to the D2D transmit power and the microwave band."""
        return replace(self.mechanism, tx_power=self.dt_power, band=self.uw_band)

    def require_pkd(self) -> float:
        if self.pkd is None:
            raise ValueError("pkd is unresolved; resolve it before evaluating the microwave band")
        return self.pkd

    def mmw_scenario(self, threshold: float = 1.0, distance: float | None = None) -> MmwScenario:
        return MmwScenario(
            tx_power=self.dt_power,
            pattern=self.pattern,
            band=self.mmw_band,
            dt_density=self.dt_density,
            access_probability=self.access_probability,
            beta=self.beta,
            distance=self.distance if distance is None else distance,
            threshold=threshold,
        )

    def uw_scenario(self, threshold: float = 1.0, distance: float | None = None) -> UwScenario:
        return UwScenario(
            dt_power=self.dt_power,
            bs_power=self.bs_power,
            band=self.uw_band,
            dt_density=self.dt_density,
            bs_density=self.bs_density,
            cu_density=self.cu_density,
            channel_count=self.channel_count,
            sensing_threshold=self.sensing_threshold,
            distance=self.distance if distance is None else distance,
            threshold=threshold,
            pkd=self.pkd,
            include_pathloss_in_threshold=self.include_pathloss_in_threshold,
        )

    def with_changes(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def resolved(self, rng: RngLike, n_cells: int | None = None) -> "SystemParams":
        """Copy with pkd fixed, estimating it when no override is set."""
        if self.pkd is not None:
            return self
        kwargs = {} if n_cells is None else {"n_cells": n_cells}
        scenario = resolve_pkd(self.uw_scenario(), rng, **kwargs)
        return replace(self, pkd=scenario.pkd)
