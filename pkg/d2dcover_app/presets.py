from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from .config import ExperimentConfig
from .evaluator import CoverageCurve, sweep
from .params import SystemParams
from .simulator import ProgressCallback, SimConfig, simulate_distance_sweep, simulate_hybrid

PRESETS = ("fig4", "fig5", "fig6")

FIG4_BETAS = (0.0027, 0.0053)
FIG5_DT_DENSITIES_PER_KM2 = (50.0, 100.0)
FIG5_BETA = 0.0053
FIG6_BETA = 0.0053

SINR_GRID_DB = tuple(float(x) for x in range(-10, 21))
DISTANCE_GRID_M = tuple(float(x) for x in range(10, 151, 10))
RATE_GRID_BPS = tuple(1e7 + k * 3e7 for k in range(34))

_ANALYTIC_BANDS = ("hybrid", "mmw", "uw")


@dataclass(frozen=True)
class CurveJob:
    """One output curve: which evaluator, which axis, and the parameter changes it needs."""

    name: str
    source: str
    mode: str
    axis: str
    grid: tuple[float, ...]
    threshold_db: float = 0.0
    changes: dict[str, Any] = field(default_factory=dict, hash=False, compare=False)

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"

    def system(self, base: SystemParams) -> SystemParams:
        return base.with_changes(**self.changes) if self.changes else base


def _curve_set(
    prefix: str, axis: str, grid: tuple[float, ...], changes: dict[str, Any], threshold_db: float = 0.0
) -> list[CurveJob]:
    jobs = [
        CurveJob(f"{prefix}_analytic_{band}", "analytic", band, axis, grid, threshold_db, dict(changes))
        for band in _ANALYTIC_BANDS
    ]
    jobs.append(
        CurveJob(f"{prefix}_monte_carlo_hybrid_oracle", "monte_carlo", "hybrid_oracle", axis, grid, threshold_db, dict(changes))
    )
    return jobs


def preset_jobs(name: str) -> list[CurveJob]:
    """Curves behind each figure; only default values plus the figure's own parameters."""
    if name == "fig4":
        jobs: list[CurveJob] = []
        for beta in FIG4_BETAS:
            jobs.extend(
                _curve_set(f"fig4_beta{beta:g}", "sinr_threshold_db", SINR_GRID_DB, {"beta": beta, "distance": 50.0})
            )
        return jobs
    if name == "fig5":
        jobs = []
        for density in FIG5_DT_DENSITIES_PER_KM2:
            jobs.extend(
                _curve_set(
                    f"fig5_dt{density:g}",
                    "distance_m",
                    DISTANCE_GRID_M,
                    {"beta": FIG5_BETA, "dt_density": density * 1e-6},
                    threshold_db=0.0,
                )
            )
        return jobs
    if name == "fig6":
        return _curve_set("fig6", "rate_bps", RATE_GRID_BPS, {"beta": FIG6_BETA, "distance": 50.0, "dt_density": 50e-6})
    raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def config_jobs(experiment: ExperimentConfig) -> list[CurveJob]:
    """Curves requested by the [sweep] section of a config file."""
    jobs = [
        CurveJob(f"analytic_{band}", "analytic", band, experiment.axis, experiment.grid, experiment.threshold_db)
        for band in experiment.analytic_bands
    ]
    jobs.extend(
        CurveJob(f"monte_carlo_{mode}", "monte_carlo", mode, experiment.axis, experiment.grid, experiment.threshold_db)
        for mode in experiment.mc_modes
    )
    return jobs


def run_job(
    job: CurveJob,
    params: SystemParams,
    simulation: SimConfig,
    *,
    workers: int = 1,
    progress: ProgressCallback | None = None,
) -> CoverageCurve:
    """Evaluate one job; `params` must already carry a resolved pkd when microwave is involved."""
    system = job.system(params)
    if job.source == "analytic":
        return sweep(
            job.axis,
            job.grid,
            system,
            job.mode,
            threshold_db=job.threshold_db,
            workers=workers,
            label=job.name,
        )
    config = replace(simulation, mode=job.mode)
    if job.axis == "distance_m":
        return simulate_distance_sweep(system, config, job.grid, job.threshold_db, progress, job.name)
    return simulate_hybrid(system, config, job.grid, job.axis, progress, job.name)
