from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np


# Minimum overlap length (meters) for a segment to count as entering a rectangle.
# Segments that only graze a boundary stay LOS.
_HIT_EPS_M = 1e-9
_SEGMENT_CHUNK = 256

RngLike = Union[int, np.random.Generator, None]


class EndpointCoveredError(ValueError):
    def __init__(self, point: "Point2D") -> None:
        super().__init__(f"endpoint ({point.x:.3f}, {point.y:.3f}) lies inside a blockage")
        self.point = point


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")

    @classmethod
    def from_polar(cls, radius: float, angle: float, origin: "Point2D | None" = None) -> "Point2D":
        base = origin or ORIGIN
        return cls(base.x + radius * math.cos(angle), base.y + radius * math.sin(angle))

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def bearing_to(self, other: "Point2D") -> float:
        """Angle of `other` seen from this point, in [0, 2*pi)."""
        return math.atan2(other.y - self.y, other.x - self.x) % (2.0 * math.pi)

    def offset(self, dx: float, dy: float) -> "Point2D":
        return Point2D(self.x + dx, self.y + dy)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


ORIGIN = Point2D(0.0, 0.0)


@dataclass(frozen=True)
class BlockageRect:
    center: Point2D
    length: float
    width: float
    orientation: float

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.width > 0):
            raise ValueError("blockage length and width must be > 0")
        if not (0.0 <= self.orientation < math.pi):
            raise ValueError("blockage orientation must lie in [0, pi)")

    def _axes(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.array([math.cos(self.orientation), math.sin(self.orientation)])
        v = np.array([-math.sin(self.orientation), math.cos(self.orientation)])
        return u, v

    def corners(self) -> np.ndarray:
        """Corners in counterclockwise order, shape (4, 2)."""
        u, v = self._axes()
        c = self.center.as_array()
        hl = 0.5 * self.length
        hw = 0.5 * self.width
        return np.array(
            [
                c + hl * u - hw * v,
                c + hl * u + hw * v,
                c - hl * u + hw * v,
                c - hl * u - hw * v,
            ]
        )

    def faces(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """(start, end, outward unit normal) for each side."""
        u, v = self._axes()
        corners = self.corners()
        normals = [u, v, -u, -v]
        return [(corners[i], corners[(i + 1) % 4], normals[i]) for i in range(4)]

    def contains(self, point: Point2D) -> bool:
        return bool(BlockageField.from_rects([self]).covers(point.as_array()[None, :])[0])


@dataclass(frozen=True)
class BlockageProcess:
    density: float
    length_range: tuple[float, float]
    width_range: tuple[float, float]

    def __post_init__(self) -> None:
        if not (self.density >= 0 and math.isfinite(self.density)):
            raise ValueError("blockage density must be >= 0")
        for name, (low, high) in (("length_range", self.length_range), ("width_range", self.width_range)):
            if not (0 < low <= high):
                raise ValueError(f"{name} must satisfy 0 < min <= max")

    @property
    def mean_length(self) -> float:
        return 0.5 * (self.length_range[0] + self.length_range[1])

    @property
    def mean_width(self) -> float:
        return 0.5 * (self.width_range[0] + self.width_range[1])

    @property
    def max_half_diagonal(self) -> float:
        return 0.5 * math.hypot(self.length_range[1], self.width_range[1])

    @classmethod
    def for_beta(
        cls,
        beta: float,
        length_range: tuple[float, float] = (20.0, 84.2),
        width_range: tuple[float, float] = (20.0, 84.2),
    ) -> "BlockageProcess":
        if beta < 0:
            raise ValueError("beta must be >= 0")
        mean_sum = 0.5 * (length_range[0] + length_range[1]) + 0.5 * (width_range[0] + width_range[1])
        return cls(density=beta * math.pi / (2.0 * mean_sum), length_range=length_range, width_range=width_range)


@dataclass(frozen=True)
class BlockageField:
    """Array form of a set of rectangles, used for batched LOS tests."""

    centers: np.ndarray
    half_lengths: np.ndarray
    half_widths: np.ndarray
    orientations: np.ndarray

    @classmethod
    def empty(cls) -> "BlockageField":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def from_rects(cls, rects: Sequence[BlockageRect]) -> "BlockageField":
        if not rects:
            return cls.empty()
        return cls(
            centers=np.array([[r.center.x, r.center.y] for r in rects], dtype=float),
            half_lengths=np.array([0.5 * r.length for r in rects], dtype=float),
            half_widths=np.array([0.5 * r.width for r in rects], dtype=float),
            orientations=np.array([r.orientation for r in rects], dtype=float),
        )

    def __len__(self) -> int:
        return int(self.centers.shape[0])

    def rects(self) -> list[BlockageRect]:
        return [
            BlockageRect(
                center=Point2D(float(c[0]), float(c[1])),
                length=float(2.0 * hl),
                width=float(2.0 * hw),
                orientation=float(o),
            )
            for c, hl, hw, o in zip(self.centers, self.half_lengths, self.half_widths, self.orientations)
        ]

    def near(self, point: Point2D, radius: float) -> "BlockageField":
        if len(self) == 0:
            return self
        reach = radius + np.hypot(self.half_lengths, self.half_widths)
        dist = np.hypot(self.centers[:, 0] - point.x, self.centers[:, 1] - point.y)
        keep = dist <= reach
        return BlockageField(
            self.centers[keep], self.half_lengths[keep], self.half_widths[keep], self.orientations[keep]
        )

    def _local(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cos_o = np.cos(self.orientations)
        sin_o = np.sin(self.orientations)
        rel_x = points[:, 0:1] - self.centers[None, :, 0]
        rel_y = points[:, 1:2] - self.centers[None, :, 1]
        return rel_x * cos_o + rel_y * sin_o, -rel_x * sin_o + rel_y * cos_o

    def covers(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies strictly inside some rectangle; points has shape (m, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self) == 0 or pts.shape[0] == 0:
            return np.zeros(pts.shape[0], dtype=bool)
        out = np.zeros(pts.shape[0], dtype=bool)
        for start in range(0, pts.shape[0], _SEGMENT_CHUNK):
            chunk = pts[start : start + _SEGMENT_CHUNK]
            pu, pv = self._local(chunk)
            inside = (np.abs(pu) < self.half_lengths) & (np.abs(pv) < self.half_widths)
            out[start : start + chunk.shape[0]] = inside.any(axis=1)
        return out

    def segments_blocked(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """True where the open segment start->end crosses a rectangle interior."""
        ends_arr = np.atleast_2d(np.asarray(ends, dtype=float))
        starts_arr = np.broadcast_to(np.asarray(starts, dtype=float), ends_arr.shape)
        count = ends_arr.shape[0]
        if len(self) == 0 or count == 0:
            return np.zeros(count, dtype=bool)
        cos_o = np.cos(self.orientations)
        sin_o = np.sin(self.orientations)
        out = np.zeros(count, dtype=bool)
        for start in range(0, count, _SEGMENT_CHUNK):
            a = starts_arr[start : start + _SEGMENT_CHUNK]
            b = ends_arr[start : start + _SEGMENT_CHUNK]
            d = b - a
            seg_len = np.hypot(d[:, 0], d[:, 1])[:, None]
            pu, pv = self._local(a)
            du = d[:, 0:1] * cos_o + d[:, 1:2] * sin_o
            dv = -d[:, 0:1] * sin_o + d[:, 1:2] * cos_o
            lo_u, hi_u = _slab(pu, du, self.half_lengths)
            lo_v, hi_v = _slab(pv, dv, self.half_widths)
            t_enter = np.maximum(np.maximum(lo_u, lo_v), 0.0)
            t_exit = np.minimum(np.minimum(hi_u, hi_v), 1.0)
            hit = (t_exit - t_enter) * seg_len > _HIT_EPS_M
            out[start : start + a.shape[0]] = hit.any(axis=1)
        return out


def _slab(p: np.ndarray, d: np.ndarray, half: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - p) / d
        t2 = (half - p) / d
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    parallel = d == 0
    inside = np.abs(p) < half
    lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
    hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    return lo, hi


def _as_field(blockages: BlockageField | Sequence[BlockageRect]) -> BlockageField:
    if isinstance(blockages, BlockageField):
        return blockages
    return BlockageField.from_rects(list(blockages))


def _window_points(count: int, window_half_width: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-window_half_width, window_half_width, size=(count, 2))


def sample_ppp(density: float, window_half_width: float, rng_seed: RngLike) -> np.ndarray:
    """Homogeneous PPP on the square [-w, w]^2 as an (n, 2) array of meters."""
    if not (density >= 0 and math.isfinite(density)):
        raise ValueError("density must be >= 0")
    if not (window_half_width > 0 and math.isfinite(window_half_width)):
        raise ValueError("window_half_width must be > 0")
    rng = as_generator(rng_seed)
    mean_count = density * (2.0 * window_half_width) ** 2
    count = int(rng.poisson(mean_count)) if mean_count > 0 else 0
    return _window_points(count, window_half_width, rng)


def sample_blockages(
    process: BlockageProcess,
    window_half_width: float,
    rng_seed: RngLike,
    center: Point2D = ORIGIN,
) -> BlockageField:
    rng = as_generator(rng_seed)
    centers = sample_ppp(process.density, window_half_width, rng)
    centers = centers + np.array([center.x, center.y])
    count = centers.shape[0]
    lengths = rng.uniform(process.length_range[0], process.length_range[1], size=count)
    widths = rng.uniform(process.width_range[0], process.width_range[1], size=count)
    orientations = rng.uniform(0.0, math.pi, size=count)
    return BlockageField(centers, 0.5 * lengths, 0.5 * widths, orientations)


def derive_beta(process: BlockageProcess) -> float:
    return 2.0 * process.density * (process.mean_length + process.mean_width) / math.pi


def is_los(a: Point2D, b: Point2D, blockages: BlockageField | Sequence[BlockageRect]) -> bool:
    field_ = _as_field(blockages)
    if len(field_) == 0:
        return True
    covered = field_.covers(np.array([[a.x, a.y], [b.x, b.y]]))
    if covered[0]:
        raise EndpointCoveredError(a)
    if covered[1]:
        raise EndpointCoveredError(b)
    if a == b:
        return True
    return not bool(field_.segments_blocked(a.as_array(), b.as_array()[None, :])[0])


def los_mask(origin: Point2D, points: np.ndarray, blockages: BlockageField) -> np.ndarray:
    """Batched LOS from `origin` to each point; points inside a blockage count as blocked."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(blockages) == 0 or pts.shape[0] == 0:
        return np.ones(pts.shape[0], dtype=bool)
    blocked = blockages.segments_blocked(origin.as_array(), pts)
    return ~(blocked | blockages.covers(pts))


def los_probability(r: float | np.ndarray, beta: float) -> float | np.ndarray:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("distance must be >= 0")
    value = np.exp(-beta * arr)
    if np.ndim(value) == 0:
        return float(value)
    return value


def empirical_los_frequency(
    process: BlockageProcess, distance: float, drops: int, rng_seed: RngLike
) -> float:
    if distance <= 0:
        raise ValueError("distance must be > 0")
    if drops < 1:
        raise ValueError("drops must be >= 1")
    rng = as_generator(rng_seed)
    half = distance + process.max_half_diagonal + 1.0
    los_count = 0
    accepted = 0
    while accepted < drops:
        field_ = sample_blockages(process, half, rng)
        if field_.covers(np.zeros((1, 2)))[0]:
            continue
        accepted += 1
        tx = Point2D.from_polar(distance, rng.uniform(0.0, 2.0 * math.pi))
        if bool(los_mask(ORIGIN, tx.as_array()[None, :], field_)[0]):
            los_count += 1
    return los_count / drops


@dataclass
class NetworkRealization:
    dts: np.ndarray
    bss: np.ndarray
    cus: np.ndarray
    blockages: BlockageField
    window_half_width: float
    test_rx: Point2D = ORIGIN
    test_tx: Point2D = field(default_factory=lambda: Point2D(0.0, 0.0))

    @property
    def d2d_distance(self) -> float:
        return self.test_rx.distance_to(self.test_tx)

    @classmethod
    def local(
        cls,
        blockages: BlockageField | Sequence[BlockageRect],
        test_tx: Point2D,
        window_half_width: float = 1000.0,
    ) -> "NetworkRealization":
        empty = np.zeros((0, 2))
        return cls(empty, empty, empty, _as_field(blockages), window_half_width, ORIGIN, test_tx)


def sample_realization(
    *,
    distance: float,
    window_half_width: float,
    dt_density: float,
    bs_density: float,
    cu_density: float,
    blockage_process: BlockageProcess | None,
    rng_seed: RngLike,
    blockage_half_width: float | None = None,
    max_attempts: int = 1000,
) -> NetworkRealization:
    """One drop of the network with the test receiver at the origin.

    Blockages and the test transmitter bearing are redrawn together until neither
    test endpoint sits inside a rectangle.
    """
    if distance <= 0:
        raise ValueError("distance must be > 0")
    rng = as_generator(rng_seed)
    dts = sample_ppp(dt_density, window_half_width, rng)
    bss = sample_ppp(bs_density, window_half_width, rng)
    cus = sample_ppp(cu_density, window_half_width, rng)
    if blockage_process is None or blockage_process.density == 0:
        tx = Point2D.from_polar(distance, rng.uniform(0.0, 2.0 * math.pi))
        return NetworkRealization(dts, bss, cus, BlockageField.empty(), window_half_width, ORIGIN, tx)

    half = blockage_half_width if blockage_half_width is not None else window_half_width
    for _ in range(max_attempts):
        blockages = sample_blockages(process=blockage_process, window_half_width=half, rng_seed=rng)
        tx = Point2D.from_polar(distance, rng.uniform(0.0, 2.0 * math.pi))
        covered = blockages.covers(np.array([[0.0, 0.0], [tx.x, tx.y]]))
        if not covered.any():
            return NetworkRealization(dts, bss, cus, blockages, window_half_width, ORIGIN, tx)
    raise RuntimeError(f"no valid test pair placement after {max_attempts} attempts")


def write_realization_csv(path: str | Path, realization: NetworkRealization, half_width: float | None = None) -> Path:
    """kind,index,x,y rows for nodes, the test pair and blockage corners inside the window."""
    limit = realization.window_half_width if half_width is None else half_width
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["kind", "index", "x", "y"])
        for kind, points in (("dt", realization.dts), ("bs", realization.bss), ("cu", realization.cus)):
            inside = points[np.max(np.abs(points), axis=1) <= limit] if points.size else points
            for index, (x, y) in enumerate(inside):
                writer.writerow([kind, index, f"{x:.3f}", f"{y:.3f}"])
        writer.writerow(["test_rx", 0, f"{realization.test_rx.x:.3f}", f"{realization.test_rx.y:.3f}"])
        writer.writerow(["test_tx", 0, f"{realization.test_tx.x:.3f}", f"{realization.test_tx.y:.3f}"])
        for index, rect in enumerate(realization.blockages.near(realization.test_rx, limit).rects()):
            for x, y in rect.corners():
                writer.writerow(["blockage", index, f"{x:.3f}", f"{y:.3f}"])
    return target
