from __future__ import annotations

import math
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .acceptance import run_acceptance, write_acceptance_json
from .cli import parse_args
from .common import age_str, utc_now
from .config import ExperimentConfig, load_config, overrides_from_args
from .geometry import sample_realization, write_realization_csv
from .manifest import build_manifest, read_manifest, write_manifest
from .params import SystemParams
from .presets import CurveJob, config_jobs, preset_jobs, run_job
from .propagation import watts_to_dbm
from .state import RunLogBuffer
from .storage import SQLiteStore

# Seed-sequence spawn key for the pkd estimate, disjoint from the per-iteration streams.
PKD_STREAM = 7

Emit = Callable[..., None]


def _validate_args(args: Any, emit_error: Emit) -> bool:
    if getattr(args, "iterations", None) is not None and args.iterations <= 0:
        emit_error("--iterations must be > 0", log_type="config")
        return False
    if getattr(args, "workers", None) is not None and args.workers <= 0:
        emit_error("--workers must be > 0", log_type="config")
        return False
    if getattr(args, "seed", None) is not None and args.seed < 0:
        emit_error("--seed must be >= 0", log_type="config")
        return False
    if getattr(args, "output_dir", None) is not None and not args.output_dir.strip():
        emit_error("--output-dir cannot be empty", log_type="config")
        return False
    if getattr(args, "db_path", None) is not None and not args.db_path.strip():
        emit_error("--db-path cannot be empty", log_type="config")
        return False
    if getattr(args, "limit", None) is not None and args.limit <= 0:
        emit_error("--limit must be > 0", log_type="config")
        return False
    if getattr(args, "window_m", None) is not None and not (math.isfinite(args.window_m) and args.window_m > 0):
        emit_error("--window-m must be > 0", log_type="config")
        return False
    return True


def resolve_params(experiment: ExperimentConfig) -> SystemParams:
    """System parameters with pkd fixed once for the whole experiment."""
    rng = np.random.default_rng(np.random.SeedSequence(experiment.seed, spawn_key=(PKD_STREAM,)))
    return experiment.system.resolved(rng, n_cells=experiment.pkd_cells)


def _open_store(db_path: str, emit_error: Emit) -> SQLiteStore | None:
    try:
        return SQLiteStore(db_path)
    except Exception as exc:
        emit_error(f"Warning: run history disabled, cannot open {db_path}: {exc}", log_type="output")
        return None


def _validate(experiment: ExperimentConfig, emit: Emit) -> int:
    params = resolve_params(experiment)
    mmw = params.mmw_band
    uw = params.uw_band
    scenario = params.uw_scenario()
    emit(f"config {experiment.source}: valid", log_type="config")
    emit(f"beta = {params.beta:.6g} 1/m", log_type="config")
    emit(f"C(mmW) = {mmw.pathloss_constant:.6g}, C(uW) = {uw.pathloss_constant:.6g}", log_type="config")
    emit(
        f"noise power: mmW {watts_to_dbm(mmw.noise_power):.2f} dBm, uW {watts_to_dbm(uw.noise_power):.2f} dBm",
        log_type="config",
    )
    emit(f"mean threshold radius = {scenario.threshold_radius:.6g} m", log_type="config")
    source = "override" if experiment.system.pkd is not None else f"estimated over {experiment.pkd_cells} cells"
    emit(f"pkd = {params.require_pkd():.6g} ({source})", log_type="config")
    emit(f"p_a = {scenario.availability:.6g}", log_type="config")
    emit(
        f"sweep: {experiment.axis} over {len(experiment.grid)} points, analytic "
        f"[{', '.join(experiment.analytic_bands) or '-'}], Monte Carlo "
        f"[{', '.join(experiment.mc_modes) or '-'}] x {experiment.simulation.iterations} iterations",
        log_type="config",
    )
    return 0


def _run_jobs(
    experiment: ExperimentConfig,
    jobs: Sequence[CurveJob],
    *,
    preset: str | None,
    log_buffer: RunLogBuffer,
    emit: Emit,
    emit_error: Emit,
) -> int:
    output_dir = Path(experiment.output_dir)
    command = "preset" if preset else "run"
    started = utc_now()
    t0 = time.monotonic()
    emit(f"estimating pkd (seed {experiment.seed})", log_type="analysis")
    params = resolve_params(experiment)
    emit(f"pkd = {params.require_pkd():.6g}", log_type="analysis")
    manifest = build_manifest(
        experiment.sections, command=command, seed=experiment.seed, preset=preset, pkd=params.pkd
    )
    digest = manifest["manifest_sha256"]

    store = _open_store(experiment.db_path, emit_error)
    run_id: int | None = None
    files: list[str] = []
    failed_jobs = 0
    failed_points = 0
    try:
        if store is not None:
            run_id = store.start_run(
                command,
                label=preset or experiment.source,
                manifest_sha256=digest,
                config=experiment.sections,
                output_dir=str(output_dir),
            )
        for index, job in enumerate(jobs, start=1):
            log_type = "analysis" if job.source == "analytic" else "simulation"
            emit(f"[{index}/{len(jobs)}] {job.name}: {job.source} {job.mode} over {len(job.grid)} points", log_type=log_type)

            def progress(done: int, total: int, _name: str = job.name) -> None:
                emit(f"{_name}: {done}/{total}", log_type="simulation")

            try:
                curve = run_job(
                    job, params, experiment.simulation, workers=experiment.simulation.workers, progress=progress
                )
            except (ValueError, RuntimeError, ArithmeticError) as exc:
                failed_jobs += 1
                emit_error(f"{job.name} failed: {type(exc).__name__}: {exc}", log_type=log_type)
                continue
            for point in curve.failed_points:
                failed_points += 1
                emit_error(f"{job.name}: point x={point.x:g} failed: {point.error}", log_type=log_type)
            path = curve.write_csv(output_dir / job.filename, digest)
            files.append(job.filename)
            emit(f"wrote {path}", log_type="output")
            if store is not None and run_id is not None:
                store.add_curve(run_id, curve)

        manifest["files"] = sorted(files)
        path = write_manifest(output_dir, manifest)
        emit(f"wrote {path} (sha256 {digest[:12]})", log_type="output")
        status = "ok" if not (failed_jobs or failed_points) else ("failed" if not files else "partial")
        emit(
            f"{command} finished in {age_str(time.monotonic() - t0)} (started {started}): {len(files)} curves, "
            f"{failed_jobs} failed curves, {failed_points} failed points",
            log_type="output",
        )
        if status != "ok":
            emit_error(f"{len(log_buffer.errors())} error lines, see run.log", log_type="output")
        if store is not None and run_id is not None:
            store.finish_run(run_id, status, f"{failed_jobs} failed curves, {failed_points} failed points")
        return 0 if status == "ok" else 1
    except Exception as exc:
        emit_error(f"{command} aborted: {type(exc).__name__}: {exc}", log_type="other")
        if store is not None and run_id is not None:
            store.finish_run(run_id, "failed", str(exc))
        return 1
    finally:
        log_buffer.write_to(output_dir / "run.log")
        if store is not None:
            try:
                store.close()
            except Exception:
                pass


def _check(experiment: ExperimentConfig, strict: bool, log_buffer: RunLogBuffer, emit: Emit, emit_error: Emit) -> int:
    output_dir = Path(experiment.output_dir)
    try:
        params = resolve_params(experiment)
        manifest = build_manifest(experiment.sections, command="check", seed=experiment.seed, pkd=params.pkd)
        results = run_acceptance(
            params,
            experiment.simulation,
            workers=experiment.simulation.workers,
            emit=lambda message: emit(message, log_type="analysis"),
        )
        for result in results:
            if result.status == "FAIL":
                emit_error(result.line(), log_type="analysis")
            else:
                emit(result.line(), log_type="analysis")
        path = write_acceptance_json(output_dir / "acceptance.json", results, manifest["manifest_sha256"])
        manifest["files"] = [path.name]
        write_manifest(output_dir, manifest)
        emit(f"wrote {path}", log_type="output")
    except Exception as exc:
        emit_error(f"check aborted: {type(exc).__name__}: {exc}", log_type="other")
        return 1
    finally:
        log_buffer.write_to(output_dir / "run.log")
    failed = [r for r in results if r.status == "FAIL"]
    if failed:
        emit_error(f"{len(failed)} criteria failed", log_type="analysis")
    return 1 if strict and failed else 0


def _realization(experiment: ExperimentConfig, window_m: float, emit: Emit) -> int:
    params = experiment.system
    rng = np.random.default_rng([experiment.seed, 0])
    process = params.blockage_process
    realization = sample_realization(
        distance=params.distance,
        window_half_width=experiment.simulation.window_half_width,
        dt_density=params.dt_density,
        bs_density=params.bs_density,
        cu_density=params.cu_density,
        blockage_process=process if params.beta > 0 else None,
        rng_seed=rng,
        blockage_half_width=min(window_m + process.max_half_diagonal, experiment.simulation.window_half_width),
    )
    path = write_realization_csv(Path(experiment.output_dir) / "realization.csv", realization, window_m)
    emit(f"wrote {path}", log_type="output")
    return 0


def _history(args: Any, emit: Emit, emit_error: Emit) -> int:
    store = _open_store(args.db_path, emit_error)
    if store is None:
        return 1
    try:
        rows = store.list_runs(args.limit)
    finally:
        store.close()
    if not rows:
        emit(f"no runs recorded in {args.db_path}")
        return 0
    for row in rows:
        emit(
            f"#{row['run_id']} {row['started_at_utc']} {row['command']} {row['label'] or '-'} "
            f"{row['status']} curves={row['curve_count']} sha256={str(row['manifest_sha256'])[:12]}"
        )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    log_buffer = RunLogBuffer(max_entries=20000)

    def emit(message: str, log_type: str = "other") -> None:
        line = f"[{utc_now()}] {message}"
        log_buffer.add(line, stream="stdout", log_type=log_type)
        print(line, file=sys.stdout, flush=True)

    def emit_error(message: str, log_type: str = "other") -> None:
        line = f"[{utc_now()}] {message}"
        log_buffer.add(line, stream="stderr", log_type=log_type)
        print(line, file=sys.stderr, flush=True)

    if not _validate_args(args, emit_error):
        return 2
    if args.command == "history":
        return _history(args, emit, emit_error)

    preset: str | None = getattr(args, "name", None) if args.command == "preset" else None
    config_path = args.config
    if args.command == "run" and str(config_path).lower().endswith(".json"):
        try:
            preset = read_manifest(config_path).get("preset") or None
        except (OSError, ValueError) as exc:
            emit_error(f"{config_path}: cannot read manifest: {exc}", log_type="config")
            return 2

    ok, detail, experiment = load_config(config_path, overrides_from_args(args))
    if not ok or experiment is None:
        emit_error(detail, log_type="config")
        return 2

    try:
        if args.command == "validate":
            return _validate(experiment, emit)
        if args.command == "realization":
            return _realization(experiment, args.window_m, emit)
        if args.command == "check":
            return _check(experiment, args.strict, log_buffer, emit, emit_error)
        if preset is not None:
            try:
                jobs = preset_jobs(preset)
            except ValueError as exc:
                emit_error(str(exc), log_type="config")
                return 2
        else:
            jobs = config_jobs(experiment)
            if not jobs:
                emit_error("[sweep] requests no analytic bands and no Monte Carlo modes", log_type="config")
                return 2
        return _run_jobs(experiment, jobs, preset=preset, log_buffer=log_buffer, emit=emit, emit_error=emit_error)
    except KeyboardInterrupt:
        emit("Stopped by user.")
        return 1
    except (ValueError, RuntimeError) as exc:
        emit_error(f"{args.command} failed: {type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
