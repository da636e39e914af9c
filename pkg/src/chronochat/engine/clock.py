"""Clocks and input channels.

The virtual clock advances only when the session loop moves it, which
makes whole sessions bit-reproducible; the wall clock anchors UTC epoch
time to a monotonic source so reads never go backwards.
"""

from __future__ import annotations

import queue
import time
from dataclasses import dataclass, field
from typing import Any


class VirtualClock:
    def __init__(self, start_us: int = 0):
        self._now = start_us

    def now_us(self) -> int:
        return self._now

    def advance_to(self, t_us: int) -> None:
        if t_us > self._now:
            self._now = t_us


class WallClock:
    def __init__(self, start_us: int | None = None):
        self._anchor_wall = (time.time_ns() // 1000 if start_us is None
                             else start_us)
        self._anchor_mono = time.monotonic_ns() // 1000

    def now_us(self) -> int:
        return self._anchor_wall + (time.monotonic_ns() // 1000
                                    - self._anchor_mono)

    def sleep_until(self, t_us: int) -> None:
        delta = t_us - self.now_us()
        if delta > 0:
            time.sleep(delta / 1e6)


# Input items. Times on scripted items are virtual arrival times; wall
# sessions stamp arrivals themselves.

@dataclass
class UserInput:
    text: str
    time_us: int | None = None       # None: stamp on arrival
    client_time_us: int | None = None


@dataclass
class RetconInput:
    text: str
    entry_id: int | None = None      # stable id, or:
    user_ordinal: int | None = None  # the n-th user entry (0-based)
    time_us: int | None = None       # arrival time (scripted)
    new_event_time_us: int | None = None  # revised event time, if any


@dataclass
class CloseInput:
    time_us: int | None = None


class ScriptedInputSource:
    """Pre-timed inputs for virtual-clock runs (times non-decreasing)."""

    def __init__(self, items):
        self._items = sorted(list(items), key=lambda it: it.time_us)
        for it in self._items:
            if it.time_us is None:
                raise ValueError("scripted items need arrival times")
        self._pos = 0

    def peek_time(self) -> int | None:
        if self._pos < len(self._items):
            return self._items[self._pos].time_us
        return None

    def pop(self):
        item = self._items[self._pos]
        self._pos += 1
        return item

    def has_close(self) -> bool:
        return any(isinstance(it, CloseInput) for it in self._items)


class QueueInputSource:
    """Thread-safe channel for wall-clock sessions."""

    def __init__(self):
        self._q: queue.Queue = queue.Queue()

    def submit(self, item) -> None:
        self._q.put(item)

    def has_pending(self) -> bool:
        return not self._q.empty()

    def get(self, timeout_s: float | None):
        try:
            return self._q.get(timeout=timeout_s)
        except queue.Empty:
            return None
