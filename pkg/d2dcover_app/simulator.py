from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .aoa_mechanism import MmWave, run_mechanism
from .evaluator import CoverageCurve, CoveragePoint, validate_grid
from .geometry import (
    ORIGIN,
    NetworkRealization,
    is_los,
    los_mask,
    sample_realization,
)
from .laplace import LaplaceEvaluation, empirical_laplace_value
from .params import SystemParams
from .propagation import db_to_linear, mainlobe_covers

SIM_MODES = ("mmw_only", "uw_only", "hybrid_oracle", "hybrid_mechanism")
LOS_MODES = ("bernoulli", "geometric")
DEFERRAL_MODES = ("outage", "condition")
SENSING_MODES = ("per_bs", "mean_radius")
MIN_LAPLACE_SAMPLES = 1000

ProgressCallback = Callable[[int, int], None]

# Blockage window around the test pair when interferers use Bernoulli LOS and only
# the mechanism needs rectangles.
_LOCAL_BLOCKAGE_MARGIN_M = 200.0


@dataclass(frozen=True)
class SimConfig:
    iterations: int = 10_000
    window_half_width: float = 5_000.0
    root_seed: int = 0
    mode: str = "hybrid_oracle"
    los_mode: str = "bernoulli"
    deferral: str = "outage"
    sensing_mode: str = "per_bs"
    nlos_interference: bool = False
    blockage_half_width: float | None = None
    workers: int = 1
    chunk_size: int = 250
    confidence: float = 0.95

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.window_half_width > 0:
            raise ValueError("window_half_width must be > 0")
        for name, value, allowed in (
            ("mode", self.mode, SIM_MODES),
            ("los_mode", self.los_mode, LOS_MODES),
            ("deferral", self.deferral, DEFERRAL_MODES),
            ("sensing_mode", self.sensing_mode, SENSING_MODES),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {', '.join(allowed)}")
        if self.blockage_half_width is not None and not self.blockage_half_width > 0:
            raise ValueError("blockage_half_width must be > 0")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValueError("workers and chunk_size must be >= 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class SinrSample:
    sinr: float
    band_used: str
    los: bool
    interference: float
    interference_bs: float = 0.0
    deferred: bool = False

    def __post_init__(self) -> None:
        if not self.sinr >= 0:
            raise ValueError("sinr must be >= 0")


def iteration_rng(root_seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([root_seed, iteration])


def _band_needs_uw(mode: str) -> bool:
    return mode != "mmw_only"


def _blockage_extent(params: SystemParams, config: SimConfig, distance: float) -> float | None:
    if params.beta == 0:
        return None
    if config.blockage_half_width is not None:
        return config.blockage_half_width
    if config.los_mode == "geometric":
        return config.window_half_width
    if config.mode == "hybrid_mechanism":
        return distance + params.mechanism_params.reflection_reach + _LOCAL_BLOCKAGE_MARGIN_M
    return None


def draw_realization(
    params: SystemParams, config: SimConfig, rng: np.random.Generator, distance: float | None = None
) -> NetworkRealization:
    d0 = params.distance if distance is None else distance
    extent = _blockage_extent(params, config, d0)
    return sample_realization(
        distance=d0,
        window_half_width=config.window_half_width,
        dt_density=params.dt_density,
        bs_density=params.bs_density if _band_needs_uw(config.mode) else 0.0,
        cu_density=0.0,
        blockage_process=params.blockage_process if extent is not None else None,
        rng_seed=rng,
        blockage_half_width=extent,
    )


def _geometric_los(realization: NetworkRealization, points: np.ndarray, reach: float) -> np.ndarray:
    mask = los_mask(ORIGIN, points, realization.blockages)
    # Rectangles are only drawn out to `reach`; anything beyond counts as blocked.
    far = np.max(np.abs(points), axis=1) > reach if points.size else np.zeros(0, dtype=bool)
    return mask & ~far


def _test_link_los(
    params: SystemParams, config: SimConfig, realization: NetworkRealization, rng: np.random.Generator
) -> bool:
    if config.los_mode == "geometric" or config.mode == "hybrid_mechanism":
        return is_los(realization.test_tx, realization.test_rx, realization.blockages)
    return bool(rng.random() < math.exp(-params.beta * realization.d2d_distance))


def simulate_mmw_iteration(
    params: SystemParams,
    realization: NetworkRealization,
    rng: np.random.Generator,
    config: SimConfig | None = None,
    *,
    test_los: bool | None = None,
    h0: float | None = None,
) -> SinrSample:
    """Test receiver SINR in the mmW band for one drop.

    Interferers transmit with probability q_a, point their mainlobe uniformly at
    random and count only when their link to the receiver is LOS (unless NLOS
    interference is enabled). A blocked test link is an outage.
    """
    cfg = config or SimConfig(mode="mmw_only")
    band = params.mmw_band
    pattern = params.pattern
    const = band.pathloss_constant
    d0 = realization.d2d_distance

    los = _test_link_los(params, cfg, realization, rng) if test_los is None else test_los
    fade0 = float(rng.exponential(1.0)) if h0 is None else h0

    dts = realization.dts
    active = dts[rng.random(dts.shape[0]) < params.access_probability]
    radii = np.hypot(active[:, 0], active[:, 1])
    keep = radii > 0
    active, radii = active[keep], radii[keep]
    count = active.shape[0]

    boresights = rng.uniform(0.0, 2.0 * math.pi, size=count)
    towards_rx = np.arctan2(-active[:, 1], -active[:, 0])
    from_rx = np.arctan2(active[:, 1], active[:, 0])
    rx_boresight = realization.test_rx.bearing_to(realization.test_tx)
    tx_gain = np.where(mainlobe_covers(towards_rx, boresights, pattern.beamwidth), pattern.mainlobe_gain, pattern.sidelobe_gain)
    rx_gain = np.where(mainlobe_covers(from_rx, rx_boresight, pattern.beamwidth), pattern.mainlobe_gain, pattern.sidelobe_gain)
    fades = rng.exponential(1.0, size=count)

    if cfg.los_mode == "geometric":
        reach = cfg.blockage_half_width or cfg.window_half_width
        los_links = _geometric_los(realization, active, reach) if params.beta > 0 else np.ones(count, dtype=bool)
    else:
        los_links = rng.random(count) < np.exp(-params.beta * radii)

    base = params.dt_power * fades * tx_gain * rx_gain * const
    interference = math.fsum(base[los_links] * radii[los_links] ** (-band.pathloss_exponent_los))
    if cfg.nlos_interference:
        blocked = ~los_links
        interference += math.fsum(base[blocked] * radii[blocked] ** (-band.pathloss_exponent_nlos))

    if not los:
        return SinrSample(0.0, "mmw", False, interference)
    signal = params.dt_power * fade0 * pattern.mainlobe_gain**2 * const * d0 ** (-band.pathloss_exponent_los)
    return SinrSample(signal / (band.noise_power + interference), "mmw", True, interference)


def _sensed_busy(
    sensors: np.ndarray,
    bss: np.ndarray,
    params: SystemParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per sensor: does any active BS arrive at or above the threshold?"""
    if bss.shape[0] == 0 or sensors.shape[0] == 0:
        return np.zeros(sensors.shape[0], dtype=bool)
    band = params.uw_band
    const = band.pathloss_constant if params.include_pathloss_in_threshold else 1.0
    dx = sensors[:, 0:1] - bss[None, :, 0]
    dy = sensors[:, 1:2] - bss[None, :, 1]
    dist = np.maximum(np.hypot(dx, dy), 1e-9)
    fades = rng.exponential(1.0, size=dist.shape)
    received = params.bs_power * fades * const * dist ** (-band.pathloss_exponent_los)
    return (received >= params.sensing_threshold).any(axis=1)


def simulate_uw_iteration(
    params: SystemParams,
    realization: NetworkRealization,
    rng: np.random.Generator,
    config: SimConfig | None = None,
    *,
    h0: float | None = None,
) -> SinrSample:
    """Test receiver SINR on the shared microwave channel k_d for one drop.

    `per_bs` sensing checks each active BS against the threshold at every D2D
    transmitter; `mean_radius` applies the deterministic mean-radius abstraction.
    """
    cfg = config or SimConfig(mode="uw_only")
    pkd = params.require_pkd()
    band = params.uw_band
    const = band.pathloss_constant
    alpha = band.pathloss_exponent_los
    d0 = realization.d2d_distance

    fade0 = float(rng.exponential(1.0)) if h0 is None else h0
    bss = realization.bss[rng.random(realization.bss.shape[0]) < pkd]
    dts = realization.dts

    if cfg.sensing_mode == "mean_radius":
        uw = params.uw_scenario(distance=d0)
        radius = uw.threshold_radius
        p_a = uw.availability
        deferred = False
        talkers = dts[rng.random(dts.shape[0]) < p_a]
        bss = bss[np.hypot(bss[:, 0], bss[:, 1]) > radius]
    else:
        tx = realization.test_tx.as_array()[None, :]
        deferred = bool(_sensed_busy(tx, bss, params, rng)[0])
        talkers = dts[~_sensed_busy(dts, bss, params, rng)]

    r_dt = np.hypot(talkers[:, 0], talkers[:, 1])
    r_dt = r_dt[r_dt > 0]
    h_dt = rng.exponential(1.0, size=r_dt.shape[0])
    i_dt = math.fsum(params.dt_power * h_dt * const * r_dt ** (-alpha))

    r_bs = np.hypot(bss[:, 0], bss[:, 1])
    r_bs = r_bs[r_bs > 0]
    h_bs = rng.exponential(1.0, size=r_bs.shape[0])
    i_bs = math.fsum(params.bs_power * h_bs * const * r_bs ** (-alpha))

    interference = i_dt + i_bs
    if deferred:
        return SinrSample(0.0, "uw", False, interference, i_bs, deferred=True)
    signal = params.dt_power * fade0 * const * d0 ** (-alpha)
    return SinrSample(signal / (band.noise_power + interference), "uw", False, interference, i_bs)


def simulate_iteration(
    params: SystemParams, config: SimConfig, iteration: int, distance: float | None = None
) -> SinrSample:
    """One independent drop under `config.mode`, seeded by (root_seed, iteration)."""
    rng = iteration_rng(config.root_seed, iteration)
    realization = draw_realization(params, config, rng, distance)
    if config.mode == "mmw_only":
        return simulate_mmw_iteration(params, realization, rng, config)
    if config.mode == "uw_only":
        return simulate_uw_iteration(params, realization, rng, config)

    los = _test_link_los(params, config, realization, rng)
    if config.mode == "hybrid_oracle":
        if los:
            return simulate_mmw_iteration(params, realization, rng, config, test_los=True)
        return simulate_uw_iteration(params, realization, rng, config)

    outcome = run_mechanism(
        realization, realization.test_tx, realization.test_rx, rng=rng, params=params.mechanism_params
    )
    if isinstance(outcome.decision, MmWave):
        true_bearing = realization.test_rx.bearing_to(realization.test_tx)
        aligned = bool(mainlobe_covers(true_bearing, outcome.decision.beam_angle, params.pattern.beamwidth))
        return simulate_mmw_iteration(params, realization, rng, config, test_los=los and aligned)
    return simulate_uw_iteration(params, realization, rng, config)


def run_iterations(
    params: SystemParams,
    config: SimConfig,
    distance: float | None = None,
    progress: ProgressCallback | None = None,
) -> list[SinrSample]:
    """All iterations of `config`, ordered by iteration index whatever the worker count."""
    if _band_needs_uw(config.mode):
        params.require_pkd()
    total = config.iterations
    chunks = [range(start, min(start + config.chunk_size, total)) for start in range(0, total, config.chunk_size)]
    results: list[list[SinrSample] | None] = [None] * len(chunks)

    def run_chunk(indices: range) -> list[SinrSample]:
        return [simulate_iteration(params, config, i, distance) for i in indices]

    done = 0
    if config.workers == 1:
        for idx, chunk in enumerate(chunks):
            results[idx] = run_chunk(chunk)
            done += len(chunk)
            if progress is not None:
                progress(done, total)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(run_chunk, chunk): idx for idx, chunk in enumerate(chunks)}
            for future in as_completed(futures):
                idx = futures[future]
                results[idx] = future.result()
                done += len(chunks[idx])
                if progress is not None:
                    progress(done, total)
    return [sample for chunk in results if chunk is not None for sample in chunk]


def wilson_halfwidth(successes: int, trials: int, confidence: float = 0.95) -> float:
    if trials <= 0:
        return float("nan")
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    p = successes / trials
    return z / (1.0 + z * z / trials) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))


def _counted(samples: Sequence[SinrSample], deferral: str) -> list[SinrSample]:
    if deferral == "condition":
        return [s for s in samples if not s.deferred]
    return list(samples)


def coverage_point(
    samples: Sequence[SinrSample], thresholds: dict[str, float], x: float, deferral: str, confidence: float
) -> CoveragePoint:
    """Fraction of counted samples whose SINR reaches the threshold of the band they used."""
    counted = _counted(samples, deferral)
    if not counted:
        return CoveragePoint(x, float("nan"), error="no samples with channel access")
    hits = sum(1 for s in counted if s.sinr > 0 and s.sinr >= thresholds[s.band_used])
    return CoveragePoint(x, hits / len(counted), wilson_halfwidth(hits, len(counted), confidence))


def curve_from_samples(
    samples: Sequence[SinrSample],
    params: SystemParams,
    config: SimConfig,
    axis: str,
    grid: Sequence[float],
    label: str = "",
) -> CoverageCurve:
    """Evaluate one sample set against the whole grid (common random numbers)."""
    if axis not in ("sinr_threshold_db", "rate_bps"):
        raise ValueError("sample curves support sinr_threshold_db and rate_bps axes")
    xs = validate_grid(grid)
    points = []
    for x in xs:
        if axis == "sinr_threshold_db":
            gamma = db_to_linear(x)
            thresholds = {"mmw": gamma, "uw": gamma}
        else:
            base = params.rate_log_base
            thresholds = {
                "mmw": base ** (x / params.mmw_band.bandwidth) - 1.0,
                "uw": base ** (x / params.uw_band.bandwidth) - 1.0,
            }
        points.append(coverage_point(samples, thresholds, x, config.deferral, config.confidence))
    return CoverageCurve(axis=axis, source="monte_carlo", mode=config.mode, points=points, label=label)


def simulate_hybrid(
    params: SystemParams,
    config: SimConfig,
    grid: Sequence[float],
    axis: str = "sinr_threshold_db",
    progress: ProgressCallback | None = None,
    label: str = "",
) -> CoverageCurve:
    """Monte Carlo coverage curve for `config.mode` over a threshold or rate grid."""
    validate_grid(grid)
    samples = run_iterations(params, config, progress=progress)
    return curve_from_samples(samples, params, config, axis, grid, label)


def simulate_distance_sweep(
    params: SystemParams,
    config: SimConfig,
    distances: Sequence[float],
    threshold_db: float = 0.0,
    progress: ProgressCallback | None = None,
    label: str = "",
) -> CoverageCurve:
    """Coverage at a fixed threshold versus D2D distance, reusing per-iteration seeds."""
    xs = validate_grid(distances)
    if xs[0] <= 0:
        raise ValueError("distances must be > 0")
    gamma = db_to_linear(threshold_db)
    points = []
    for idx, d0 in enumerate(xs):
        samples = run_iterations(params, config, distance=d0)
        points.append(coverage_point(samples, {"mmw": gamma, "uw": gamma}, d0, config.deferral, config.confidence))
        if progress is not None:
            progress(idx + 1, len(xs))
    return CoverageCurve(axis="distance_m", source="monte_carlo", mode=config.mode, points=points, label=label)


def sample_mmw_interference(params: SystemParams, config: SimConfig, distance: float | None = None) -> np.ndarray:
    """LOS mmW interference at the receiver, one value per iteration."""
    cfg = replace(config, mode="mmw_only")
    return np.array([s.interference for s in run_iterations(params, cfg, distance)])


def sample_uw_interference(
    params: SystemParams, config: SimConfig, distance: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(I_DT, I_BS) samples on the shared microwave channel."""
    cfg = replace(config, mode="uw_only")
    samples = run_iterations(params, cfg, distance)
    i_bs = np.array([s.interference_bs for s in samples])
    i_all = np.array([s.interference for s in samples])
    return i_all - i_bs, i_bs


def access_frequency(samples: Sequence[SinrSample]) -> float:
    if not samples:
        raise ValueError("no samples")
    return 1.0 - sum(1 for s in samples if s.deferred) / len(samples)


def empirical_laplace(
    interference_samples: Sequence[float] | np.ndarray,
    s: float,
    *,
    bootstrap: int = 200,
    confidence: float = 0.95,
    rng_seed: int = 0,
) -> LaplaceEvaluation:
    """Sample mean of exp(-s I) with a percentile-bootstrap confidence half-width."""
    samples = np.asarray(interference_samples, dtype=float)
    if samples.ndim != 1 or samples.shape[0] < MIN_LAPLACE_SAMPLES:
        raise ValueError(f"empirical Laplace transform needs at least {MIN_LAPLACE_SAMPLES} samples")
    if s < 0:
        raise ValueError("transform argument must be >= 0")
    values = empirical_laplace_value(samples, s)
    mean = float(np.mean(values))
    if s == 0 or not np.any(samples):
        return LaplaceEvaluation(value=1.0, method="empirical", ci_halfwidth=0.0, detail=f"n={samples.shape[0]}")
    rng = np.random.default_rng(rng_seed)
    picks = rng.integers(0, values.shape[0], size=(bootstrap, values.shape[0]))
    means = values[picks].mean(axis=1)
    tail = 50.0 * (1.0 - confidence)
    low, high = np.percentile(means, [tail, 100.0 - tail])
    return LaplaceEvaluation(
        value=mean,
        method="empirical",
        ci_halfwidth=float(0.5 * (high - low)),
        detail=f"n={samples.shape[0]}, bootstrap={bootstrap}",
    )
