from __future__ import annotations

import os
import sqlite3
import threading
from typing import Any

from .evaluator import CoverageCurve
from .storage_runs import RunRepository


class SQLiteStore:
    def __init__(self, db_path: str) -> None:
        self.db_path = db_path
        db_dir = os.path.dirname(os.path.abspath(db_path))
        if db_dir:
            os.makedirs(db_dir, exist_ok=True)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(db_path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        self._init_schema()

        self._run_repo = RunRepository(self._conn, self._lock)

    def _init_schema(self) -> None:
        schema = """
        CREATE TABLE IF NOT EXISTS runs (
          run_id INTEGER PRIMARY KEY AUTOINCREMENT,
          command TEXT NOT NULL,
          label TEXT NOT NULL DEFAULT '',
          manifest_sha256 TEXT NOT NULL DEFAULT '',
          config_json TEXT NOT NULL,
          output_dir TEXT NOT NULL DEFAULT '',
          status TEXT NOT NULL,
          detail TEXT,
          started_at_utc TEXT NOT NULL,
          finished_at_utc TEXT
        );

        CREATE TABLE IF NOT EXISTS curves (
          curve_id INTEGER PRIMARY KEY AUTOINCREMENT,
          run_id INTEGER NOT NULL REFERENCES runs(run_id) ON DELETE CASCADE,
          label TEXT NOT NULL,
          axis TEXT NOT NULL,
          source TEXT NOT NULL,
          mode TEXT NOT NULL,
          points_json TEXT NOT NULL,
          failed_points INTEGER NOT NULL DEFAULT 0
        );

        CREATE INDEX IF NOT EXISTS idx_curves_run
          ON curves (run_id, curve_id);
        """
        with self._lock:
            self._conn.executescript(schema)
            self._conn.commit()

    def start_run(
        self,
        command: str,
        *,
        label: str = "",
        manifest_sha256: str = "",
        config: dict[str, Any] | None = None,
        output_dir: str = "",
    ) -> int:
        return self._run_repo.start_run(
            command,
            label=label,
            manifest_sha256=manifest_sha256,
            config=config,
            output_dir=output_dir,
        )

    def finish_run(self, run_id: int, status: str, detail: str = "") -> None:
        self._run_repo.finish_run(run_id, status, detail)

    def add_curve(self, run_id: int, curve: CoverageCurve) -> int:
        return self._run_repo.add_curve(run_id, curve)

    def list_runs(self, limit: int = 20) -> list[dict[str, Any]]:
        return self._run_repo.list_runs(limit)

    def get_run_config(self, run_id: int) -> dict[str, Any] | None:
        return self._run_repo.get_run_config(run_id)

    def list_curves(self, run_id: int) -> list[dict[str, Any]]:
        return self._run_repo.list_curves(run_id)

    def close(self) -> None:
        with self._lock:
            self._conn.close()
