"""Append-only transcript log with per-line checksums.

One JSON object per line: {id, t_us, speaker, text, provenance, revision,
retcon_of, crc}. The crc covers the canonical rendering of the record
without the crc field, so torn writes are detected and replay stops at
the last valid line. A retcon appends a fresh line under the same id with
a bumped revision; the full lineage stays recoverable.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field


def _canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def encode_line(record: dict) -> str:
    body = {k: v for k, v in record.items() if k != "crc"}
    crc = zlib.crc32(_canonical(body).encode("utf-8"))
    return _canonical({**body, "crc": crc})


def decode_line(line: str) -> dict | None:
    """The record, or None when the line is corrupt."""
    try:
        rec = json.loads(line)
        crc = rec.pop("crc")
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError):
        return None
    if zlib.crc32(_canonical(rec).encode("utf-8")) != crc:
        return None
    return rec


def entry_record(entry) -> dict:
    return {
        "id": entry.id,
        "t_us": entry.event.time_us,
        "speaker": entry.event.speaker,
        "text": entry.event.text,
        "provenance": entry.provenance,
        "revision": entry.revision,
        "retcon_of": entry.retcon_of,
    }


class TranscriptLog:
    def __init__(self, path: str):
        self.path = path
        self._fp = open(path, "a", encoding="utf-8")

    def append(self, record: dict) -> None:
        self._fp.write(encode_line(record))
        self._fp.write("\n")
        self._fp.flush()

    def close(self) -> None:
        self._fp.close()


@dataclass
class ReplayedTranscript:
    records: list = field(default_factory=list)   # every valid line, in order
    truncated: bool = False                       # hit a corrupt line

    def final_history(self) -> list[dict]:
        """Latest revision of each entry, in first-appearance order."""
        latest: dict[int, dict] = {}
        order: list[int] = []
        for rec in self.records:
            if rec["id"] not in latest:
                order.append(rec["id"])
            latest[rec["id"]] = rec
        return [latest[i] for i in order]

    def lineage(self, entry_id: int) -> list[dict]:
        return [r for r in self.records if r["id"] == entry_id]


def replay(path: str) -> ReplayedTranscript:
    out = ReplayedTranscript()
    if not os.path.exists(path):
        return out
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.rstrip("\n")
            if not line:
                continue
            rec = decode_line(line)
            if rec is None:
                out.truncated = True
                break
            out.records.append(rec)
    return out
