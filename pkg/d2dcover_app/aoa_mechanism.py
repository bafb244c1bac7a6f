from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .geometry import BlockageField, NetworkRealization, Point2D, RngLike, as_generator, is_los
from .propagation import BandParams, dbm_to_watts, db_to_linear, watts_to_dbm

TWO_PI = 2.0 * math.pi
DEFAULT_WINDOW = 2
DEFAULT_JITTER_SIGMA_M = 0.3
DEFAULT_TOLERANCE = math.radians(2.0)
DEFAULT_RESOLUTION = math.radians(1.0)
DEFAULT_REFLECTION_LOSS = db_to_linear(-10.0)
DEFAULT_PEAK_FLOOR = dbm_to_watts(-120.0)
DEFAULT_SCATTER = math.radians(60.0)
DEFAULT_TX_POWER_W = dbm_to_watts(0.0)
DEFAULT_UW_BAND = BandParams.with_thermal_noise(2e9, 1e8, 4.0)

_JITTER_REDRAWS = 100
_RECENTRE_PASSES = 4
# Reflection points closer than this to a face corner are ignored.
_FACE_MARGIN_M = 1e-6


class ProfileNotFullError(ValueError):
    def __init__(self, have: int, window: int) -> None:
        super().__init__(f"peer profile holds {have} of {window} spectra; decision deferred")
        self.have = have
        self.window = window


def _wrap(angle: float) -> float:
    wrapped = angle % TWO_PI
    # -1e-17 % 2pi rounds up to 2pi
    return 0.0 if wrapped >= TWO_PI else wrapped


def angular_distance(a: float, b: float) -> float:
    diff = abs(a - b) % TWO_PI
    return min(diff, TWO_PI - diff)


def circular_mean(angles: list[float]) -> float:
    vec = np.exp(1j * np.sort(np.asarray(angles, dtype=float))).sum()
    return _wrap(float(np.angle(vec)))


@dataclass(frozen=True)
class AoAPeak:
    magnitude: float
    angle: float

    def __post_init__(self) -> None:
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise ValueError("peak magnitude must be > 0")
        if not (0.0 <= self.angle < TWO_PI):
            raise ValueError("peak angle must lie in [0, 2*pi)")

    @classmethod
    def at(cls, magnitude: float, angle: float) -> "AoAPeak":
        return cls(magnitude, _wrap(angle))


@dataclass(frozen=True)
class AoASpectrum:
    peaks: tuple[AoAPeak, ...] = ()

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self) -> Iterator[AoAPeak]:
        return iter(self.peaks)

    @property
    def angles(self) -> list[float]:
        return [p.angle for p in self.peaks]


@dataclass(frozen=True)
class PeerProfile:
    window: int
    spectra: tuple[AoASpectrum, ...] = ()

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("profile window must be >= 1")
        if len(self.spectra) > self.window:
            raise ValueError("profile holds more spectra than its window")

    @property
    def is_full(self) -> bool:
        return len(self.spectra) == self.window


@dataclass(frozen=True)
class MmWave:
    beam_angle: float


@dataclass(frozen=True)
class MicroWave:
    pass


BandDecision = Union[MmWave, MicroWave]


@dataclass(frozen=True)
class MechanismParams:
    """Knobs of the link-detection mechanism; angles in radians, powers in W."""

    window: int = DEFAULT_WINDOW
    jitter_sigma: float = DEFAULT_JITTER_SIGMA_M
    angular_tolerance: float = DEFAULT_TOLERANCE
    angular_resolution: float = DEFAULT_RESOLUTION
    reflection_loss: float = DEFAULT_REFLECTION_LOSS
    peak_floor: float = DEFAULT_PEAK_FLOOR
    reflection_scatter: float = DEFAULT_SCATTER
    tx_power: float = DEFAULT_TX_POWER_W
    band: BandParams = field(default=DEFAULT_UW_BAND)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.jitter_sigma < 0 or self.reflection_scatter < 0:
            raise ValueError("jitter_sigma and reflection_scatter must be >= 0")
        if not (0 < self.angular_tolerance < math.pi):
            raise ValueError("angular_tolerance must lie in (0, pi)")
        if self.angular_resolution < 0:
            raise ValueError("angular_resolution must be >= 0")
        if not (0 < self.reflection_loss <= 1):
            raise ValueError("reflection_loss must lie in (0, 1]")
        if not (self.peak_floor > 0 and self.tx_power > 0):
            raise ValueError("peak_floor and tx_power must be > 0")

    @property
    def reflection_reach(self) -> float:
        """Longest reflected path whose peak can still clear the floor."""
        gain = self.tx_power * self.band.pathloss_constant * self.reflection_loss
        return (gain / self.peak_floor) ** (1.0 / self.band.pathloss_exponent_los)


@dataclass(frozen=True)
class MechanismOutcome:
    decision: BandDecision
    combined: AoASpectrum
    profile: PeerProfile


def _received(params: MechanismParams, length: float) -> float:
    return params.tx_power * params.band.pathloss_constant * length ** (-params.band.pathloss_exponent_los)


def _reflections(
    field_: BlockageField, tx: np.ndarray, rx: np.ndarray, reach: float
) -> list[tuple[float, float]]:
    """(path length, arrival angle at rx) of each feasible first-order specular bounce."""
    found: list[tuple[float, float]] = []
    for rect in field_.rects():
        for start, end, normal in rect.faces():
            side_tx = float(np.dot(tx - start, normal))
            side_rx = float(np.dot(rx - start, normal))
            if side_tx <= 0 or side_rx <= 0:
                continue
            image = tx - 2.0 * side_tx * normal
            towards = image - rx
            length = float(np.hypot(towards[0], towards[1]))
            if length > reach:
                continue
            denom = float(np.dot(towards, normal))
            if denom == 0:
                continue
            t = float(np.dot(start - rx, normal)) / denom
            if not 0.0 < t < 1.0:
                continue
            bounce = rx + t * towards
            edge = end - start
            edge_len = float(np.hypot(edge[0], edge[1]))
            along = float(np.dot(bounce - start, edge)) / edge_len
            if not _FACE_MARGIN_M < along < edge_len - _FACE_MARGIN_M:
                continue
            legs = field_.segments_blocked(np.array([tx, bounce]), np.array([bounce, rx]))
            if legs.any():
                continue
            found.append((length, math.atan2(bounce[1] - rx[1], bounce[0] - rx[0])))
    return found


def _merge(peaks: list[AoAPeak], resolution: float) -> tuple[AoAPeak, ...]:
    merged: list[AoAPeak] = []
    for peak in sorted(peaks, key=lambda p: (-p.magnitude, p.angle)):
        for idx, kept in enumerate(merged):
            if angular_distance(kept.angle, peak.angle) <= resolution:
                merged[idx] = AoAPeak(kept.magnitude + peak.magnitude, kept.angle)
                break
        else:
            merged.append(peak)
    return tuple(sorted(merged, key=lambda p: p.angle))


def compute_aoa_spectrum(
    realization: NetworkRealization,
    tx: Point2D,
    rx: Point2D,
    reflection_loss: float = DEFAULT_REFLECTION_LOSS,
    peak_floor: float = DEFAULT_PEAK_FLOOR,
    *,
    params: MechanismParams | None = None,
    reflection_scatter: float = 0.0,
    rng: RngLike = None,
) -> AoASpectrum:
    """Peaks seen at `rx`: the direct path if clear plus first-order reflections.

    `reflection_scatter` adds Gaussian angle noise to reflected peaks only.
    """
    if tx == rx:
        raise ValueError("tx and rx must differ")
    cfg = replace(params or MechanismParams(), reflection_loss=reflection_loss, peak_floor=peak_floor)
    distance = tx.distance_to(rx)
    reach = cfg.reflection_reach
    field_ = realization.blockages.near(rx, max(distance, reach))
    peaks: list[AoAPeak] = []
    if is_los(tx, rx, field_):
        magnitude = _received(cfg, distance)
        if magnitude >= peak_floor:
            peaks.append(AoAPeak(magnitude, rx.bearing_to(tx)))
    if len(field_) and distance < reach:
        gen = as_generator(rng) if reflection_scatter > 0 else None
        for length, angle in _reflections(field_, tx.as_array(), rx.as_array(), reach):
            magnitude = _received(cfg, length) * reflection_loss
            if magnitude < peak_floor:
                continue
            if gen is not None:
                angle += float(gen.normal(0.0, reflection_scatter))
            peaks.append(AoAPeak.at(magnitude, angle))
    return AoASpectrum(_merge(peaks, cfg.angular_resolution))


def push_observation(profile: PeerProfile, spectrum: AoASpectrum) -> PeerProfile:
    spectra = (profile.spectra + (spectrum,))[-profile.window :]
    return PeerProfile(profile.window, spectra)


def _nearest(spectrum: AoASpectrum, angle: float, tolerance: float) -> int | None:
    best: int | None = None
    best_dist = math.inf
    for idx, peak in enumerate(spectrum.peaks):
        dist = angular_distance(peak.angle, angle)
        if dist <= tolerance and dist < best_dist:
            best, best_dist = idx, dist
    return best


def _members(profile: PeerProfile, angle: float, tolerance: float) -> list[tuple[int, int]] | None:
    members: list[tuple[int, int]] = []
    for j, other in enumerate(profile.spectra):
        idx = _nearest(other, angle, tolerance)
        if idx is None:
            return None
        members.append((j, idx))
    return members


def _settle(
    profile: PeerProfile, members: list[tuple[int, int]] | None, tolerance: float
) -> tuple[frozenset[tuple[int, int]], list[AoAPeak], float] | None:
    """Re-anchor a cluster on its centre until every member lies within tolerance of it."""
    for _ in range(_RECENTRE_PASSES):
        if members is None:
            return None
        peaks = [profile.spectra[j].peaks[i] for j, i in members]
        centre = circular_mean([p.angle for p in peaks])
        if all(angular_distance(p.angle, centre) <= tolerance for p in peaks):
            return frozenset(members), peaks, centre
        members = _members(profile, centre, tolerance)
    return None


def combine_profile(profile: PeerProfile, angular_tolerance: float = DEFAULT_TOLERANCE) -> AoASpectrum:
    """Peaks present in every spectrum of a full window, averaged across the window.

    Every peak of every spectrum serves as a candidate reference; a cluster is kept
    when each spectrum has a peak within `angular_tolerance` of the cluster's
    circular mean. Tighter clusters win when candidates share members. The result
    does not depend on the order of the window.
    """
    if not profile.is_full:
        raise ProfileNotFullError(len(profile.spectra), profile.window)
    if profile.window == 1:
        return AoASpectrum(tuple(sorted(profile.spectra[0].peaks, key=lambda p: p.angle)))

    candidates: dict[frozenset[tuple[int, int]], tuple[list[AoAPeak], float]] = {}
    for spectrum in profile.spectra:
        for anchor in spectrum.peaks:
            settled = _settle(profile, _members(profile, anchor.angle, angular_tolerance), angular_tolerance)
            if settled is not None:
                key, peaks, centre = settled
                candidates.setdefault(key, (peaks, centre))

    ranked = []
    for key, (peaks, centre) in candidates.items():
        spread = max(angular_distance(p.angle, centre) for p in peaks)
        signature = tuple(sorted((p.angle, p.magnitude) for p in peaks))
        ranked.append((spread, centre, signature, key, peaks))
    ranked.sort(key=lambda item: item[:3])

    used: set[tuple[int, int]] = set()
    out: list[AoAPeak] = []
    for _, centre, _, key, peaks in ranked:
        if used & key:
            continue
        used |= key
        magnitude = math.fsum(p.magnitude for p in peaks) / len(peaks)
        out.append(AoAPeak(magnitude, centre))
    return AoASpectrum(tuple(sorted(out, key=lambda p: p.angle)))


def decide_band(combined: AoASpectrum) -> BandDecision:
    if len(combined) == 1:
        return MmWave(beam_angle=combined.peaks[0].angle)
    return MicroWave()


def _jittered(rx: Point2D, sigma: float, field_: BlockageField, rng: np.random.Generator) -> Point2D:
    if sigma == 0:
        return rx
    for _ in range(_JITTER_REDRAWS):
        dx, dy = rng.normal(0.0, sigma, size=2)
        moved = rx.offset(float(dx), float(dy))
        if not field_.covers(moved.as_array()[None, :])[0]:
            return moved
    return rx


def run_mechanism(
    realization: NetworkRealization,
    tx: Point2D,
    rx: Point2D,
    W: int | None = None,
    jitter_sigma: float | None = None,
    rng: RngLike = None,
    params: MechanismParams | None = None,
) -> MechanismOutcome:
    """Observe the link for W rounds with receiver jitter, then decide the band."""
    cfg = params or MechanismParams()
    window = cfg.window if W is None else W
    sigma = cfg.jitter_sigma if jitter_sigma is None else jitter_sigma
    if window < 1:
        raise ValueError("W must be >= 1")
    if sigma < 0:
        raise ValueError("jitter_sigma must be >= 0")
    gen = as_generator(rng)
    nearby = realization.blockages.near(rx, sigma * 10.0 + 1.0)
    profile = PeerProfile(window)
    for _ in range(window):
        observer = _jittered(rx, sigma, nearby, gen)
        spectrum = compute_aoa_spectrum(
            realization,
            tx,
            observer,
            cfg.reflection_loss,
            cfg.peak_floor,
            params=cfg,
            reflection_scatter=cfg.reflection_scatter,
            rng=gen,
        )
        profile = push_observation(profile, spectrum)
    combined = combine_profile(profile, cfg.angular_tolerance)
    return MechanismOutcome(decide_band(combined), combined, profile)


def write_profile_csv(path: str | Path, profile: PeerProfile, combined: AoASpectrum | None = None) -> Path:
    """Dump a profile as angle_deg,magnitude_dbm,round_index rows; the combined spectrum uses round -1."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["angle_deg", "magnitude_dbm", "round_index"])
        rounds = list(enumerate(profile.spectra))
        if combined is not None:
            rounds.append((-1, combined))
        for index, spectrum in rounds:
            for peak in spectrum.peaks:
                writer.writerow([f"{math.degrees(peak.angle):.6f}", f"{watts_to_dbm(peak.magnitude):.6f}", index])
    return target
