from __future__ import annotations

import json
import math
from typing import Any, Callable


class StoreRepositoryBase:
    _RUN_STATUSES = {"running", "ok", "partial", "failed"}

    def __init__(self, conn: Any, lock: Any) -> None:
        self._conn = conn
        self._lock = lock

    @classmethod
    def _run_status_text(cls, value: Any) -> str:
        text = str(value or "").strip().lower()
        if text in cls._RUN_STATUSES:
            return text
        return "failed"

    @staticmethod
    def _number(value: Any, kind: Callable[[Any], Any] = float) -> Any:
        """Column value through `kind`, or None when absent or malformed."""
        if value is None:
            return None
        try:
            return kind(value)
        except (TypeError, ValueError):
            return None

    @staticmethod
    def _json_loads(value: Any, fallback: Any) -> Any:
        if not value:
            return fallback
        if isinstance(value, (dict, list)):
            return value
        try:
            return json.loads(str(value))
        except json.JSONDecodeError:
            return fallback

    @classmethod
    def _json_safe_value(cls, value: Any) -> Any:
        if value is None or isinstance(value, (str, int, bool)):
            return value
        if isinstance(value, float):
            # JSON has no nan/inf; failed points are stored as null.
            return value if math.isfinite(value) else None
        if isinstance(value, dict):
            return {str(key): cls._json_safe_value(item) for key, item in value.items()}
        if isinstance(value, (list, tuple, set)):
            return [cls._json_safe_value(item) for item in value]
        try:
            return cls._json_safe_value(float(value))
        except (TypeError, ValueError):
            return str(value)
