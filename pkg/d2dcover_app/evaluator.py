from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from .analysis_mmw import MmwScenario, coverage_mmw
from .analysis_uw import ClosedFormUnavailableError, UwScenario, coverage_uw
from .geometry import los_probability
from .laplace import QuadratureError
from .params import SystemParams
from .propagation import db_to_linear

AXES = ("sinr_threshold_db", "distance_m", "rate_bps")
SOURCES = ("analytic", "monte_carlo")
BANDS = ("mmw", "uw", "hybrid")
CSV_COLUMNS = ("x", "value", "ci_halfwidth", "source", "mode")

_POINT_ERRORS = (ValueError, QuadratureError, ClosedFormUnavailableError, ArithmeticError)


@dataclass(frozen=True)
class CoveragePoint:
    x: float
    probability: float
    ci_halfwidth: float | None = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass
class CoverageCurve:
    axis: str
    source: str
    mode: str
    points: list[CoveragePoint] = field(default_factory=list)
    label: str = ""

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"unknown curve axis {self.axis!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown curve source {self.source!r}")
        xs = [p.x for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("curve x values must be strictly increasing")
        for point in self.points:
            if point.failed:
                continue
            if not 0.0 <= point.probability <= 1.0:
                raise ValueError(f"probability {point.probability!r} at x={point.x:g} outside [0, 1]")

    @property
    def xs(self) -> list[float]:
        return [p.x for p in self.points]

    @property
    def probabilities(self) -> list[float]:
        return [p.probability for p in self.points]

    @property
    def failed_points(self) -> list[CoveragePoint]:
        return [p for p in self.points if p.failed]

    def value_at(self, x: float) -> float:
        for point in self.points:
            if math.isclose(point.x, x, rel_tol=1e-12, abs_tol=1e-12):
                return point.probability
        raise KeyError(x)

    def to_rows(self) -> list[dict[str, Any]]:
        return [
            {
                "x": _fmt(p.x),
                "value": _fmt(p.probability),
                "ci_halfwidth": "" if p.ci_halfwidth is None else _fmt(p.ci_halfwidth),
                "source": self.source,
                "mode": self.mode,
            }
            for p in self.points
        ]

    def write_csv(self, path: str | Path, manifest_hash: str | None = None) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as handle:
            if manifest_hash:
                handle.write(f"# manifest_sha256={manifest_hash}\n")
            writer = csv.DictWriter(handle, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.to_rows())
        return target


def _fmt(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return format(float(value), ".12g")


def read_curve_csv(path: str | Path, axis: str) -> CoverageCurve:
    """Load a curve written by CoverageCurve.write_csv; failed points come back as nan."""
    source = "analytic"
    mode = ""
    points: list[CoveragePoint] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        rows = csv.DictReader(line for line in handle if not line.startswith("#"))
        for row in rows:
            source = row["source"]
            mode = row["mode"]
            value = float(row["value"])
            ci = float(row["ci_halfwidth"]) if row["ci_halfwidth"] else None
            points.append(CoveragePoint(float(row["x"]), value, ci, "failed" if math.isnan(value) else ""))
    return CoverageCurve(axis=axis, source=source, mode=mode, points=points)


def coverage_hybrid(mmw: MmwScenario, uw: UwScenario, uw_method: str = "quadrature") -> float:
    """LOS-weighted mix of the conditional mmW coverage and the microwave coverage."""
    if not math.isclose(mmw.distance, uw.distance, rel_tol=1e-12):
        raise ValueError(f"scenarios disagree on D2D distance ({mmw.distance:g} m vs {uw.distance:g} m)")
    p_los = los_probability(mmw.distance, mmw.beta) if math.isfinite(mmw.beta) else 0.0
    if p_los == 0.0:
        return coverage_uw(uw, method=uw_method)
    if p_los == 1.0:
        return coverage_mmw(mmw, conditional_on_los=True)
    value = p_los * coverage_mmw(mmw, conditional_on_los=True) + (1.0 - p_los) * coverage_uw(uw, method=uw_method)
    return min(1.0, max(0.0, value))


def rate_threshold(rate: float, bandwidth: float, log_base: float = 2.0) -> float:
    """SINR needed for B log(1 + SINR) to reach `rate`."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    return log_base ** (rate / bandwidth) - 1.0


def sinr_coverage(params: SystemParams, threshold: float, band: str, distance: float | None = None) -> float:
    """Analytic SINR coverage of one band; the mmW-only band counts NLOS links as outage."""
    if band == "mmw":
        return coverage_mmw(params.mmw_scenario(threshold, distance), conditional_on_los=False)
    if band == "uw":
        return coverage_uw(params.uw_scenario(threshold, distance), method=params.uw_laplace_method)
    if band == "hybrid":
        return coverage_hybrid(
            params.mmw_scenario(threshold, distance),
            params.uw_scenario(threshold, distance),
            uw_method=params.uw_laplace_method,
        )
    raise ValueError(f"unknown band {band!r}")


def rate_coverage(params: SystemParams, rate: float, band: str, distance: float | None = None) -> float:
    """P[B log(1 + SINR) >= rate], each band at its own bandwidth."""
    base = params.rate_log_base
    gamma_mm = rate_threshold(rate, params.mmw_band.bandwidth, base)
    gamma_uw = rate_threshold(rate, params.uw_band.bandwidth, base)
    if band == "mmw":
        return sinr_coverage(params, gamma_mm, "mmw", distance)
    if band == "uw":
        return sinr_coverage(params, gamma_uw, "uw", distance)
    if band == "hybrid":
        return coverage_hybrid(
            params.mmw_scenario(gamma_mm, distance),
            params.uw_scenario(gamma_uw, distance),
            uw_method=params.uw_laplace_method,
        )
    raise ValueError(f"unknown band {band!r}")


def validate_grid(grid: Sequence[float]) -> list[float]:
    values = [float(x) for x in grid]
    if not values:
        raise ValueError("sweep grid must not be empty")
    if any(not math.isfinite(x) for x in values):
        raise ValueError("sweep grid values must be finite")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    return values


def _point_evaluator(
    axis: str, params: SystemParams, band: str, threshold_db: float, distance: float | None
) -> Callable[[float], float]:
    if axis == "sinr_threshold_db":
        return lambda x: sinr_coverage(params, db_to_linear(x), band, distance)
    if axis == "distance_m":
        gamma = db_to_linear(threshold_db)
        return lambda x: sinr_coverage(params, gamma, band, x)
    return lambda x: rate_coverage(params, x, band, distance)


def sweep(
    axis: str,
    grid: Sequence[float],
    params: SystemParams,
    band: str,
    *,
    threshold_db: float = 0.0,
    distance: float | None = None,
    workers: int = 1,
    label: str = "",
) -> CoverageCurve:
    """Analytic coverage over `grid`; points that fail carry nan and the error text."""
    if axis not in AXES:
        raise ValueError(f"unknown curve axis {axis!r}")
    if band not in BANDS:
        raise ValueError(f"unknown band {band!r}")
    xs = validate_grid(grid)
    if band in ("uw", "hybrid"):
        params.require_pkd()
    evaluate = _point_evaluator(axis, params, band, threshold_db, distance)

    def one(x: float) -> CoveragePoint:
        try:
            return CoveragePoint(x, evaluate(x))
        except _POINT_ERRORS as exc:
            return CoveragePoint(x, float("nan"), error=f"{type(exc).__name__}: {exc}")

    if workers > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(one, xs))
    else:
        points = [one(x) for x in xs]
    return CoverageCurve(axis=axis, source="analytic", mode=band, points=points, label=label)
