from __future__ import annotations

import threading
from collections import deque
from pathlib import Path
from typing import Any

from .common import utc_now

RUN_LOG_TYPES = {
    "config",
    "analysis",
    "simulation",
    "output",
    "other",
}


def normalize_run_log_type(raw_type: Any) -> str:
    text = str(raw_type or "").strip().lower().replace("-", "_").replace(" ", "_")
    if text in RUN_LOG_TYPES:
        return text
    return "other"


class RunLogBuffer:
    def __init__(self, max_entries: int = 5000) -> None:
        self._lock = threading.Lock()
        self._entries: deque[dict[str, Any]] = deque(maxlen=max_entries)
        self._next_seq = 1

    def add(self, message: str, stream: str, *, log_type: str = "other") -> None:
        normalized_type = normalize_run_log_type(log_type)
        lines = str(message).splitlines() or [str(message)]
        with self._lock:
            for line in lines:
                if not line:
                    continue
                self._entries.append(
                    {
                        "seq": self._next_seq,
                        "at_utc": utc_now(),
                        "stream": stream,
                        "type": normalized_type,
                        "message": line,
                    }
                )
                self._next_seq += 1

    def errors(self) -> list[dict[str, Any]]:
        with self._lock:
            return [item.copy() for item in self._entries if item["stream"] == "stderr"]

    def write_to(self, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            entries = list(self._entries)
        with target.open("w", encoding="utf-8") as handle:
            for item in entries:
                handle.write(f"{item['seq']}\t{item['stream']}\t{item['type']}\t{item['message']}\n")
        return target
