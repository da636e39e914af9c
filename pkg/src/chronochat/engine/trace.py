"""Session audit trace: every sample, disposition and emission, replayable
and diffable (virtual runs with one seed produce identical traces)."""

from __future__ import annotations

import hashlib
import json
from typing import Any


class Trace:
    def __init__(self):
        self.records: list[dict] = []

    def record(self, t_us: int, kind: str, **payload) -> None:
        self.records.append({"t": t_us, "kind": kind, "payload": payload})

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r, sort_keys=True, ensure_ascii=False)
                         for r in self.records) + ("\n" if self.records else "")

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def by_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]


def event_digest(events) -> str:
    blob = json.dumps([[e.time_us, e.speaker, e.text] for e in events],
                      sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
