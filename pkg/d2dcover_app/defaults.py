from __future__ import annotations

from typing import Any


DEFAULT_EXPERIMENT_CONFIG: dict[str, dict[str, Any]] = {
    "system": {
        "dt_power_dbm": 0.0,
        "bs_power_dbm": 37.0,
        "mainlobe_gain_dbi": 10.0,
        "sidelobe_gain_dbi": -10.0,
        "beamwidth_deg": 30.0,
        "dt_density_per_km2": 50.0,
        "bs_density_per_km2": 1.0,
        "cu_density_per_km2": 5.0,
        "mmw_frequency_ghz": 28.0,
        "uw_frequency_ghz": 2.0,
        "mmw_bandwidth_ghz": 1.0,
        "uw_bandwidth_ghz": 0.1,
        "noise_figure_db": 10.0,
        "pathloss_exponent_uw": 4.0,
        "pathloss_exponent_los": 2.0,
        "pathloss_exponent_nlos": 5.0,
        "sensing_threshold_dbm": -85.0,
        "access_probability": 1.0,
        "channel_count": 8,
        "pkd": None,
        "pkd_cells": 20000,
        "include_pathloss_in_threshold": False,
        "d2d_distance_m": 50.0,
        "uw_laplace_method": "quadrature",
        "rate_log_base": 2.0,
    },
    "blockage": {
        "beta_per_m": 0.0053,
        "density_per_km2": None,
        "length_min_m": 20.0,
        "length_max_m": 84.2,
        "width_min_m": 20.0,
        "width_max_m": 84.2,
    },
    "mechanism": {
        "window": 2,
        "jitter_sigma_m": 0.3,
        "angular_tolerance_deg": 2.0,
        "angular_resolution_deg": 1.0,
        "reflection_loss_db": -10.0,
        "peak_floor_dbm": -120.0,
        "reflection_scatter_deg": 60.0,
    },
    "simulation": {
        "iterations": 10000,
        "window_half_width_m": 5000.0,
        "seed": 0,
        "los_mode": "bernoulli",
        "deferral": "outage",
        "sensing_mode": "per_bs",
        "nlos_interference": False,
        "workers": 1,
        "chunk_size": 250,
        "confidence": 0.95,
    },
    "sweep": {
        "axis": "sinr_threshold_db",
        "start": -10.0,
        "stop": 20.0,
        "step": 1.0,
        "values": None,
        "threshold_db": 0.0,
        "analytic": "mmw, uw, hybrid",
        "monte_carlo": "hybrid_oracle",
    },
    "output": {
        "output_dir": "results",
        "db_path": "d2dcover.db",
    },
}
