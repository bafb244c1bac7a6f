from __future__ import annotations

import configparser
import json
import math
import re
from copy import deepcopy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .aoa_mechanism import MechanismParams
from .analysis_uw import UW_LAPLACE_METHODS
from .common import to_bool, to_float
from .defaults import DEFAULT_EXPERIMENT_CONFIG
from .evaluator import AXES, BANDS
from .geometry import BlockageProcess, derive_beta
from .params import SystemParams
from .propagation import AntennaPattern, BandParams, db_to_linear, dbm_to_watts
from .simulator import DEFERRAL_MODES, LOS_MODES, SENSING_MODES, SIM_MODES, SimConfig

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*[=:]")
_GRID_DIGITS = 12

Sections = dict[str, dict[str, Any]]


class ConfigFieldError(ValueError):
    def __init__(self, section: str, key: str, reason: str) -> None:
        super().__init__(f"[{section}] {key}: {reason}" if key else f"[{section}] {reason}")
        self.section = section
        self.key = key
        self.reason = reason


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemParams
    simulation: SimConfig
    axis: str
    grid: tuple[float, ...]
    threshold_db: float
    analytic_bands: tuple[str, ...]
    mc_modes: tuple[str, ...]
    output_dir: str
    db_path: str
    seed: int
    pkd_cells: int
    sections: Sections = field(compare=False, repr=False, default_factory=dict)
    source: str = ""


def default_sections() -> Sections:
    return deepcopy(DEFAULT_EXPERIMENT_CONFIG)


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        head = _SECTION_RE.match(line)
        if head:
            section = head.group(1).strip()
            index.setdefault((section, ""), lineno)
            continue
        key = _KEY_RE.match(line)
        if key and section:
            index[(section, key.group(1))] = lineno
    return index


def read_ini(path: str | Path) -> tuple[bool, str, Sections | None, dict[tuple[str, str], int]]:
    """Parse a sectioned key/value file, keeping the line number of every key."""
    target = Path(path)
    try:
        text = target.read_text(encoding="utf-8")
    except OSError as exc:
        return False, f"{target}: cannot read config: {exc}", None, {}
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string(text, source=str(target))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]  # type: ignore[attr-defined]
        reason = str(exc).splitlines()[0]
        return False, f"{target}:{lineno if lineno is not None else '?'}: {reason}", None, {}
    sections: Sections = {}
    for name in parser.sections():
        sections[name] = {key: value for key, value in parser.items(name)}
    return True, "parsed", sections, _line_index(text)


def _overlay(current: Sections, update: Sections) -> Sections:
    merged = deepcopy(current)
    for section, values in update.items():
        if section not in DEFAULT_EXPERIMENT_CONFIG:
            raise ConfigFieldError(section, "", "unknown section")
        if not isinstance(values, dict):
            raise ConfigFieldError(section, "", "expected key/value pairs")
        for key, value in values.items():
            if key not in DEFAULT_EXPERIMENT_CONFIG[section]:
                raise ConfigFieldError(section, key, "unknown key")
            if isinstance(value, str) and not value.strip():
                value = None
            merged[section][key] = value
    return merged


def merge_sections(current: Sections, update: Sections) -> tuple[bool, str, Sections | None]:
    """Overlay `update` on `current`; unknown sections or keys are rejected."""
    if not isinstance(update, dict):
        return False, "expected an object of sections", None
    try:
        merged = _overlay(current, update)
    except ConfigFieldError as exc:
        return False, str(exc), None
    return True, "merged", merged


def _blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "auto"))


class _Picker:
    """Typed reads from merged sections; every failure names its section and key."""

    def __init__(self, sections: Sections) -> None:
        self._sections = sections

    def raw(self, section: str, key: str) -> Any:
        return self._sections[section].get(key)

    def number(
        self,
        section: str,
        key: str,
        *,
        low: float | None = None,
        high: float | None = None,
        low_open: bool = False,
        optional: bool = False,
    ) -> float | None:
        value = self.raw(section, key)
        if _blank(value):
            if optional:
                return None
            raise ConfigFieldError(section, key, "value required")
        number = to_float(value)
        if number is None:
            raise ConfigFieldError(section, key, f"expected a finite number, got {value!r}")
        if low is not None and (number <= low if low_open else number < low):
            raise ConfigFieldError(section, key, f"must be {'>' if low_open else '>='} {low:g}")
        if high is not None and number > high:
            raise ConfigFieldError(section, key, f"must be <= {high:g}")
        return number

    def required(self, section: str, key: str, **kwargs: Any) -> float:
        number = self.number(section, key, **kwargs)
        assert number is not None
        return number

    def integer(self, section: str, key: str, *, low: int | None = None) -> int:
        number = self.required(section, key)
        if not float(number).is_integer():
            raise ConfigFieldError(section, key, f"expected an integer, got {self.raw(section, key)!r}")
        value = int(number)
        if low is not None and value < low:
            raise ConfigFieldError(section, key, f"must be >= {low}")
        return value

    def flag(self, section: str, key: str) -> bool:
        value = to_bool(self.raw(section, key))
        if value is None:
            raise ConfigFieldError(section, key, "expected true or false")
        return value

    def choice(self, section: str, key: str, allowed: tuple[str, ...]) -> str:
        text = str(self.raw(section, key) or "").strip().lower()
        if text not in allowed:
            raise ConfigFieldError(section, key, f"must be one of {', '.join(allowed)}")
        return text

    def choices(self, section: str, key: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
        value = self.raw(section, key)
        if _blank(value):
            return ()
        items = [item.strip().lower() for item in str(value).split(",") if item.strip()]
        for item in items:
            if item not in allowed:
                raise ConfigFieldError(section, key, f"{item!r} is not one of {', '.join(allowed)}")
        return tuple(dict.fromkeys(items))


def _grid(pick: _Picker, axis: str) -> tuple[float, ...]:
    values = pick.raw("sweep", "values")
    if not _blank(values):
        grid = []
        for item in str(values).split(","):
            number = to_float(item)
            if number is None:
                raise ConfigFieldError("sweep", "values", f"expected numbers, got {item.strip()!r}")
            grid.append(number)
    else:
        start = pick.required("sweep", "start")
        stop = pick.required("sweep", "stop")
        step = pick.required("sweep", "step", low=0.0, low_open=True)
        if stop < start:
            raise ConfigFieldError("sweep", "stop", "must be >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = [round(start + k * step, _GRID_DIGITS) for k in range(count)]
    if not grid:
        raise ConfigFieldError("sweep", "values", "grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigFieldError("sweep", "values", "grid must be strictly increasing")
    if axis == "distance_m" and grid[0] <= 0:
        raise ConfigFieldError("sweep", "values", "distances must be > 0")
    if axis == "rate_bps" and grid[0] < 0:
        raise ConfigFieldError("sweep", "values", "rates must be >= 0")
    return tuple(grid)


def _system(pick: _Picker) -> tuple[SystemParams, int]:
    s = "system"
    alpha_uw = pick.required(s, "pathloss_exponent_uw", low=2.0)
    alpha_los = pick.required(s, "pathloss_exponent_los", low=2.0)
    alpha_nlos = pick.required(s, "pathloss_exponent_nlos", low=2.0)
    noise_figure = pick.required(s, "noise_figure_db")
    mmw_band = BandParams.with_thermal_noise(
        pick.required(s, "mmw_frequency_ghz", low=0.0, low_open=True) * 1e9,
        pick.required(s, "mmw_bandwidth_ghz", low=0.0, low_open=True) * 1e9,
        alpha_los,
        alpha_nlos,
        noise_figure,
    )
    uw_band = BandParams.with_thermal_noise(
        pick.required(s, "uw_frequency_ghz", low=0.0, low_open=True) * 1e9,
        pick.required(s, "uw_bandwidth_ghz", low=0.0, low_open=True) * 1e9,
        alpha_uw,
        alpha_uw,
        noise_figure,
    )
    main_dbi = pick.required(s, "mainlobe_gain_dbi")
    side_dbi = pick.required(s, "sidelobe_gain_dbi")
    if side_dbi >= main_dbi:
        raise ConfigFieldError(s, "sidelobe_gain_dbi", "must be below mainlobe_gain_dbi")
    pattern = AntennaPattern.from_dbi(main_dbi, side_dbi, pick.required(s, "beamwidth_deg", low=0.0, low_open=True, high=360.0))

    b = "blockage"
    length_range = (
        pick.required(b, "length_min_m", low=0.0, low_open=True),
        pick.required(b, "length_max_m", low=0.0, low_open=True),
    )
    width_range = (
        pick.required(b, "width_min_m", low=0.0, low_open=True),
        pick.required(b, "width_max_m", low=0.0, low_open=True),
    )
    if length_range[1] < length_range[0]:
        raise ConfigFieldError(b, "length_max_m", "must be >= length_min_m")
    if width_range[1] < width_range[0]:
        raise ConfigFieldError(b, "width_max_m", "must be >= width_min_m")
    blockage_density = pick.number(b, "density_per_km2", low=0.0, optional=True)
    if blockage_density is not None:
        beta = derive_beta(BlockageProcess(blockage_density * 1e-6, length_range, width_range))
    else:
        beta = pick.required(b, "beta_per_m", low=0.0)

    m = "mechanism"
    loss_db = pick.required(m, "reflection_loss_db", high=0.0)
    mechanism = MechanismParams(
        window=pick.integer(m, "window", low=1),
        jitter_sigma=pick.required(m, "jitter_sigma_m", low=0.0),
        angular_tolerance=math.radians(pick.required(m, "angular_tolerance_deg", low=0.0, low_open=True, high=90.0)),
        angular_resolution=math.radians(pick.required(m, "angular_resolution_deg", low=0.0)),
        reflection_loss=db_to_linear(loss_db),
        peak_floor=dbm_to_watts(pick.required(m, "peak_floor_dbm")),
        reflection_scatter=math.radians(pick.required(m, "reflection_scatter_deg", low=0.0)),
    )

    params = SystemParams(
        dt_power=dbm_to_watts(pick.required(s, "dt_power_dbm")),
        bs_power=dbm_to_watts(pick.required(s, "bs_power_dbm")),
        pattern=pattern,
        mmw_band=mmw_band,
        uw_band=uw_band,
        dt_density=pick.required(s, "dt_density_per_km2", low=0.0) * 1e-6,
        bs_density=pick.required(s, "bs_density_per_km2", low=0.0, low_open=True) * 1e-6,
        cu_density=pick.required(s, "cu_density_per_km2", low=0.0) * 1e-6,
        beta=beta,
        blockage_length_range=length_range,
        blockage_width_range=width_range,
        access_probability=pick.required(s, "access_probability", low=0.0, high=1.0),
        sensing_threshold=dbm_to_watts(pick.required(s, "sensing_threshold_dbm")),
        channel_count=pick.integer(s, "channel_count", low=1),
        pkd=pick.number(s, "pkd", low=0.0, high=1.0, optional=True),
        include_pathloss_in_threshold=pick.flag(s, "include_pathloss_in_threshold"),
        distance=pick.required(s, "d2d_distance_m", low=0.0, low_open=True),
        mechanism=mechanism,
        uw_laplace_method=pick.choice(s, "uw_laplace_method", UW_LAPLACE_METHODS),
        rate_log_base=pick.required(s, "rate_log_base", low=1.0, low_open=True),
    )
    return params, pick.integer(s, "pkd_cells", low=100)


def build_experiment(sections: Sections, source: str = "") -> ExperimentConfig:
    """Convert merged sections into typed parameters; raises ConfigFieldError."""
    pick = _Picker(sections)
    system, pkd_cells = _system(pick)

    sim = "simulation"
    seed = pick.integer(sim, "seed", low=0)
    sweep = "sweep"
    axis = pick.choice(sweep, "axis", AXES)
    mc_modes = pick.choices(sweep, "monte_carlo", SIM_MODES)
    simulation = SimConfig(
        iterations=pick.integer(sim, "iterations", low=1),
        window_half_width=pick.required(sim, "window_half_width_m", low=0.0, low_open=True),
        root_seed=seed,
        mode=mc_modes[0] if mc_modes else "hybrid_oracle",
        los_mode=pick.choice(sim, "los_mode", LOS_MODES),
        deferral=pick.choice(sim, "deferral", DEFERRAL_MODES),
        sensing_mode=pick.choice(sim, "sensing_mode", SENSING_MODES),
        nlos_interference=pick.flag(sim, "nlos_interference"),
        workers=pick.integer(sim, "workers", low=1),
        chunk_size=pick.integer(sim, "chunk_size", low=1),
        confidence=pick.required(sim, "confidence", low=0.0, low_open=True, high=0.999999),
    )
    output_dir = str(pick.raw("output", "output_dir") or "").strip()
    if not output_dir:
        raise ConfigFieldError("output", "output_dir", "cannot be empty")
    db_path = str(pick.raw("output", "db_path") or "").strip()
    if not db_path:
        raise ConfigFieldError("output", "db_path", "cannot be empty")
    return ExperimentConfig(
        system=system,
        simulation=simulation,
        axis=axis,
        grid=_grid(pick, axis),
        threshold_db=pick.required(sweep, "threshold_db"),
        analytic_bands=pick.choices(sweep, "analytic", BANDS),
        mc_modes=mc_modes,
        output_dir=output_dir,
        db_path=db_path,
        seed=seed,
        pkd_cells=pkd_cells,
        sections=deepcopy(sections),
        source=source,
    )


def overrides_from_args(args: Any) -> Sections:
    update: Sections = {}

    def put(section: str, key: str, value: Any) -> None:
        if value is None:
            return
        update.setdefault(section, {})[key] = value

    put("simulation", "seed", getattr(args, "seed", None))
    put("simulation", "iterations", getattr(args, "iterations", None))
    put("simulation", "workers", getattr(args, "workers", None))
    put("output", "output_dir", getattr(args, "output_dir", None))
    put("output", "db_path", getattr(args, "db_path", None))
    return update


def _anchor(origin: str, lines: dict[tuple[str, str], int], exc: ConfigFieldError) -> str:
    lineno = lines.get((exc.section, exc.key)) or lines.get((exc.section, ""))
    if lineno is not None:
        return f"{origin}:{lineno}: {exc}"
    return f"{origin}: {exc}"


def load_sections(path: str | Path | None) -> tuple[bool, str, Sections | None, dict[tuple[str, str], int]]:
    """File sections (INI or a manifest.json) without defaults applied."""
    if path is None:
        return True, "defaults", {}, {}
    target = Path(path)
    if target.suffix.lower() == ".json":
        try:
            payload = json.loads(target.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            return False, f"{target}: cannot read manifest: {exc}", None, {}
        sections = payload.get("config") if isinstance(payload, dict) else None
        if not isinstance(sections, dict):
            return False, f"{target}: manifest has no config object", None, {}
        return True, "manifest", sections, {}
    return read_ini(target)


def load_config(
    path: str | Path | None, overrides: Sections | None = None
) -> tuple[bool, str, ExperimentConfig | None]:
    """Defaults, then the file, then CLI overrides; validated before anything runs."""
    origin = str(path) if path is not None else "<defaults>"
    ok, detail, file_sections, lines = load_sections(path)
    if not ok or file_sections is None:
        return False, detail, None

    if not isinstance(file_sections, dict):
        return False, f"{origin}: expected an object of sections", None
    try:
        merged = _overlay(default_sections(), file_sections)
    except ConfigFieldError as exc:
        return False, _anchor(origin, lines, exc), None

    ok, detail, merged_cli = merge_sections(merged, overrides or {})
    if not ok or merged_cli is None:
        return False, f"command line: {detail}", None

    try:
        experiment = build_experiment(merged_cli, source=origin)
    except ConfigFieldError as exc:
        in_file = (exc.section, exc.key) in lines
        overridden = exc.key in (overrides or {}).get(exc.section, {})
        if overridden and not in_file:
            return False, f"command line: {exc}", None
        return False, _anchor(origin, lines, exc), None
    except ValueError as exc:
        return False, f"{origin}: {exc}", None
    return True, "valid", experiment
