"""Transcript events and the JSON-lines interchange format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from ..timebase import US_PER_CENTISECOND, US_PER_DECISECOND, truncate_us

MESSENGER = "messenger"
SPOKEN = "spoken"
FORMATS = (MESSENGER, SPOKEN)

GRANULARITY_US = {MESSENGER: US_PER_DECISECOND, SPOKEN: US_PER_CENTISECOND}


@dataclass(frozen=True, slots=True)
class Event:
    """One transcript entry: absolute time, speaker id, message text.

    Messenger times are UTC epoch microseconds; spoken times are
    microseconds since session start.
    """

    time_us: int
    speaker: str
    text: str

    def truncated(self, fmt: str) -> "Event":
        """Copy with time truncated to the format's codec granularity."""
        return Event(truncate_us(self.time_us, GRANULARITY_US[fmt]),
                     self.speaker, self.text)


def event_to_json(ev: Event) -> str:
    return json.dumps({"t_us": ev.time_us, "speaker": ev.speaker,
                       "text": ev.text}, ensure_ascii=False)


def event_from_json(line: str) -> Event:
    rec = json.loads(line)
    return Event(int(rec["t_us"]), rec["speaker"], rec["text"])


def write_events(events: Iterable[Event], fp: TextIO) -> None:
    for ev in events:
        fp.write(event_to_json(ev))
        fp.write("\n")


def read_events(fp: TextIO) -> Iterator[Event]:
    for line in fp:
        line = line.strip()
        if line:
            yield event_from_json(line)


def load_events(path: str) -> list[Event]:
    with open(path, encoding="utf-8") as fp:
        return list(read_events(fp))


def save_events(events: Iterable[Event], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_events(events, fp)
