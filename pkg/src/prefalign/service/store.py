"""Append-only JSONL event log, one file per session.

The log is the source of truth: session state is reconstructed by
replaying it, so a process restart mid-session loses nothing. Events
carry strictly increasing sequence numbers per session; appends flush to
disk before returning.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

EVENT_KINDS = ("created", "query-issued", "answer-received",
               "vertical-stopped", "horizontal-moved", "terminated")


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    kind: str
    payload: dict
    timestamp: float

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.kind}")
        if self.seq < 0:
            raise ValueError("seq must be >= 0")


class EventStore:
    """Directory of per-session JSONL files with an in-memory seq counter."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._next_seq: dict[str, int] = {}

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise ValueError(f"bad session id: {session_id!r}")
        return self.root / f"{session_id}.jsonl"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def append(self, session_id: str, kind: str, payload: dict,
               timestamp: Optional[float] = None) -> SessionEvent:
        seq = self._next_seq.get(session_id)
        if seq is None:
            seq = sum(1 for _ in self.read(session_id)) if self.exists(session_id) else 0
        event = SessionEvent(seq=seq, kind=kind, payload=payload,
                             timestamp=timestamp if timestamp is not None else time.time())
        line = json.dumps({"seq": event.seq, "kind": event.kind,
                           "payload": event.payload, "ts": event.timestamp},
                          sort_keys=True)
        with open(self._path(session_id), "a") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._next_seq[session_id] = seq + 1
        return event

    def read(self, session_id: str) -> Iterator[SessionEvent]:
        path = self._path(session_id)
        if not path.exists():
            raise KeyError(f"no such session: {session_id}")
        with open(path) as fh:
            expected = 0
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                event = SessionEvent(seq=raw["seq"], kind=raw["kind"],
                                     payload=raw["payload"], timestamp=raw["ts"])
                if event.seq != expected:
                    raise ValueError(
                        f"event log corrupt for {session_id}: "
                        f"seq {event.seq} where {expected} expected")
                expected += 1
                yield event

    def read_all(self, session_id: str) -> list[SessionEvent]:
        return list(self.read(session_id))

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))
