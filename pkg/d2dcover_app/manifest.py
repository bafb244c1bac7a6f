from __future__ import annotations

import hashlib
import json
import math
import subprocess
from pathlib import Path
from typing import Any, Iterable

from .common import utc_now

MANIFEST_NAME = "manifest.json"
_UNHASHED_KEYS = ("created_at_utc", "files", "manifest_sha256")
# Settings that never change a curve value.
_UNHASHED_CONFIG = (("output", None), ("simulation", "workers"))


def git_describe(cwd: str | Path | None = None) -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=str(cwd) if cwd is not None else str(Path(__file__).resolve().parent),
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    text = proc.stdout.strip()
    if proc.returncode != 0 or not text:
        return "unknown"
    return text


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(key): _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def build_manifest(
    sections: dict[str, dict[str, Any]],
    *,
    command: str,
    seed: int,
    preset: str | None = None,
    pkd: float | None = None,
    files: Iterable[str] = (),
    describe: str | None = None,
) -> dict[str, Any]:
    """Everything needed to regenerate a run's CSVs; `config` holds the merged sections."""
    manifest: dict[str, Any] = {
        "command": command,
        "preset": preset,
        "seed": int(seed),
        "pkd": pkd,
        "git_describe": describe if describe is not None else git_describe(),
        "config": _json_safe(sections),
        "files": sorted(files),
        "created_at_utc": utc_now(),
    }
    manifest["manifest_sha256"] = manifest_hash(manifest)
    return manifest


def manifest_hash(manifest: dict[str, Any]) -> str:
    """sha256 of the canonical JSON, ignoring the timestamp, the file list and output locations."""
    payload = {key: value for key, value in manifest.items() if key not in _UNHASHED_KEYS}
    config = {name: dict(values) for name, values in (payload.get("config") or {}).items()}
    for section, key in _UNHASHED_CONFIG:
        if key is None:
            config.pop(section, None)
        elif section in config:
            config[section].pop(key, None)
    payload["config"] = config
    text = json.dumps(_json_safe(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(output_dir: str | Path, manifest: dict[str, Any]) -> Path:
    target = Path(output_dir) / MANIFEST_NAME
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return target


def read_manifest(path: str | Path) -> dict[str, Any]:
    with Path(path).open("r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: manifest must be a JSON object")
    return payload
