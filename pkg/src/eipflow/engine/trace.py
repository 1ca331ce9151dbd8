"""Engine event log, written as JSON lines."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

TRACE_FIELDS = ("seq", "time", "instance", "node", "event", "message", "detail")


@dataclass(frozen=True)
class EngineEvent:
    seq: int
    time: float
    instance: str | None
    node: str | None
    event: str
    message: str | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"seq": self.seq, "time": self.time, "instance": self.instance, "node": self.node,
                "event": self.event, "message": self.message, "detail": self.detail}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class TraceLog:
    def __init__(self):
        self.events: list[EngineEvent] = []
        self._lock = threading.Lock()

    def emit(self, time: float, instance: str | None, node: str | None, event: str,
             message: str | None = None, **detail: Any) -> EngineEvent:
        with self._lock:
            ev = EngineEvent(len(self.events) + 1, float(time), instance, node, event, message, detail)
            self.events.append(ev)
            return ev

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of(self, event: str) -> list[EngineEvent]:
        return [e for e in self.events if e.event == event]

    def patterns(self) -> list[str]:
        """Pattern kinds in execution order."""
        return [e.detail["kind"] for e in self.of("pattern")]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def read_jsonl(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
