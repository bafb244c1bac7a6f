from __future__ import annotations

import json
from typing import Any

from .common import utc_now
from .evaluator import CoverageCurve
from .storage_repo_base import StoreRepositoryBase


class RunRepository(StoreRepositoryBase):
    def start_run(
        self,
        command: str,
        *,
        label: str = "",
        manifest_sha256: str = "",
        config: dict[str, Any] | None = None,
        output_dir: str = "",
    ) -> int:
        payload = json.dumps(self._json_safe_value(config or {}), separators=(",", ":"), sort_keys=True)
        with self._lock:
            cur = self._conn.execute(
                """
                INSERT INTO runs (
                  command, label, manifest_sha256, config_json, output_dir,
                  status, started_at_utc
                )
                VALUES (?, ?, ?, ?, ?, 'running', ?)
                """,
                (str(command), str(label), str(manifest_sha256), payload, str(output_dir), utc_now()),
            )
            self._conn.commit()
            return int(cur.lastrowid)

    def finish_run(self, run_id: int, status: str, detail: str = "") -> None:
        with self._lock:
            self._conn.execute(
                """
                UPDATE runs
                SET status = ?, detail = ?, finished_at_utc = ?
                WHERE run_id = ?
                """,
                (self._run_status_text(status), str(detail), utc_now(), int(run_id)),
            )
            self._conn.commit()

    def add_curve(self, run_id: int, curve: CoverageCurve) -> int:
        points = [
            {"x": p.x, "value": p.probability, "ci_halfwidth": p.ci_halfwidth, "error": p.error}
            for p in curve.points
        ]
        payload = json.dumps(self._json_safe_value(points), separators=(",", ":"))
        with self._lock:
            cur = self._conn.execute(
                """
                INSERT INTO curves (run_id, label, axis, source, mode, points_json, failed_points)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    int(run_id),
                    curve.label,
                    curve.axis,
                    curve.source,
                    curve.mode,
                    payload,
                    len(curve.failed_points),
                ),
            )
            self._conn.commit()
            return int(cur.lastrowid)

    def list_runs(self, limit: int = 20) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                """
                SELECT r.run_id, r.command, r.label, r.manifest_sha256, r.output_dir, r.status,
                       r.detail, r.started_at_utc, r.finished_at_utc,
                       COUNT(c.curve_id) AS curve_count
                FROM runs r
                LEFT JOIN curves c ON c.run_id = r.run_id
                GROUP BY r.run_id
                ORDER BY r.run_id DESC
                LIMIT ?
                """,
                (max(1, int(limit)),),
            ).fetchall()
        return [
            {
                "run_id": self._number(row["run_id"], int),
                "command": row["command"],
                "label": row["label"],
                "manifest_sha256": row["manifest_sha256"],
                "output_dir": row["output_dir"],
                "status": self._run_status_text(row["status"]),
                "detail": row["detail"] or "",
                "started_at_utc": row["started_at_utc"],
                "finished_at_utc": row["finished_at_utc"],
                "curve_count": self._number(row["curve_count"], int) or 0,
            }
            for row in rows
        ]

    def get_run_config(self, run_id: int) -> dict[str, Any] | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT config_json FROM runs WHERE run_id = ?",
                (int(run_id),),
            ).fetchone()
        if not row:
            return None
        raw = self._json_loads(row["config_json"], None)
        return raw if isinstance(raw, dict) else None

    def list_curves(self, run_id: int) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                """
                SELECT curve_id, label, axis, source, mode, points_json, failed_points
                FROM curves
                WHERE run_id = ?
                ORDER BY curve_id ASC
                """,
                (int(run_id),),
            ).fetchall()
        out: list[dict[str, Any]] = []
        for row in rows:
            points = self._json_loads(row["points_json"], [])
            out.append(
                {
                    "curve_id": self._number(row["curve_id"], int),
                    "label": row["label"],
                    "axis": row["axis"],
                    "source": row["source"],
                    "mode": row["mode"],
                    "points": [
                        {
                            "x": self._number(p.get("x")),
                            "value": self._number(p.get("value")),
                            "ci_halfwidth": self._number(p.get("ci_halfwidth")),
                            "error": str(p.get("error") or ""),
                        }
                        for p in points
                        if isinstance(p, dict)
                    ],
                    "failed_points": self._number(row["failed_points"], int) or 0,
                }
            )
        return out
