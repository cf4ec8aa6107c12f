"""Append-only JSON-lines event log shared by all sessions of a run."""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path


class EventLogError(ValueError):
    pass


class EventLog:
    def __init__(self, path: Path | None = None, clock=time.time):
        self.path = Path(path) if path else None
        self.events: list[dict] = []
        self._clock = clock
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8")

    def emit(self, type_: str, **fields) -> dict:
        with self._lock:
            record = {"seq": len(self.events), "ts": round(self._clock(), 6), "type": type_, **fields}
            self.events.append(record)
            if self._fh is not None:
                self._fh.write(json.dumps(record, sort_keys=False) + "\n")
                self._fh.flush()
        return record

    def of_type(self, type_: str) -> list[dict]:
        return [e for e in self.events if e["type"] == type_]

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_events(path: Path) -> list[dict]:
    events = []
    with Path(path).open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EventLogError(f"{path}:{n}: not JSON: {line.strip()[:120]}") from exc
            if not isinstance(record, dict) or "type" not in record or "seq" not in record:
                raise EventLogError(f"{path}:{n}: not an event record: {line.strip()[:120]}")
            events.append(record)
    return events
